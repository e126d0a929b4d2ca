#include "tkg/tokenizer.hpp"

#include <cctype>

namespace tkg {

namespace {

bool word_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c == '-' || c == '\'';
}

}  // namespace

std::vector<std::string> RuleTokenizer::tokenize(const std::string& text) const {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      tokens.push_back(std::string(1, static_cast<char>(c)));
    }
  }
  flush();
  return tokens;
}

const Tokenizer& default_tokenizer() {
  static RuleTokenizer tokenizer;
  return tokenizer;
}

}  // namespace tkg
