#pragma once

#include <memory>
#include <string>
#include <vector>

namespace tkg {

// Pluggable tokenizer interface so an external tokenizer can be substituted
// for the built-in rules.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokenize(const std::string& text) const = 0;
};

// Rule-based approximation of the usual NLP pipeline tokenizers: lowercases,
// keeps alnum/underscore/hyphen/apostrophe runs together and splits
// everything else into single-character tokens.
class RuleTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> tokenize(const std::string& text) const override;
};

const Tokenizer& default_tokenizer();

}  // namespace tkg
