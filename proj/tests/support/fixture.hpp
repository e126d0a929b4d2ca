#pragma once

// Deterministic synthetic command-generation dataset: small template worlds
// with take/put/look/move dynamics. Observations are templated from the
// commands, so a model can learn the mapping, and previous_graph is tracked
// with label-level set semantics.

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "support/oracle.hpp"
#include "tkg/data.hpp"
#include "tkg/graph.hpp"

namespace tkg::testing {

struct FixtureOptions {
  int games = 10;
  int walkthrough_steps = 2;  // at most 4
  int random_steps = 4;
  unsigned seed = 7;
};

namespace fixture_detail {

inline const std::vector<std::string> kRooms = {
    "kitchen", "pantry", "bedroom", "garden", "study",
    "cellar",  "attic",  "hallway", "lounge", "porch"};
inline const std::vector<std::string> kItems = {
    "apple", "carrot", "knife", "book",  "lamp",
    "key",   "pot",    "plate", "candle", "coin"};
inline const std::vector<std::string> kSupports = {
    "table", "chair", "counter", "shelf", "bed",
    "desk",  "bench", "stool",   "rack",  "crate"};

struct BranchState {
  TripleSet triples;
  std::string room;
  std::string support;
  std::string item;
  bool carried = false;
};

}  // namespace fixture_detail

inline std::vector<RawExample> make_fixture_dataset(const FixtureOptions& options) {
  using namespace fixture_detail;
  std::vector<RawExample> out;
  std::mt19937_64 rng(options.seed);

  for (int g = 0; g < options.games; ++g) {
    std::string game_id = "game" + std::to_string(g);

    // Entity picks for this game, one room/support/item per walkthrough step.
    std::vector<std::string> rooms = kRooms, items = kItems, supports = kSupports;
    std::shuffle(rooms.begin(), rooms.end(), rng);
    std::shuffle(items.begin(), items.end(), rng);
    std::shuffle(supports.begin(), supports.end(), rng);

    BranchState walkthrough;
    for (int ws = 0; ws < options.walkthrough_steps; ++ws) {
      RawExample ex;
      ex.game_id = game_id;
      ex.walkthrough_step = ws;
      ex.random_step = 0;
      ex.previous_graph = walkthrough.triples;

      const std::string& room = rooms[ws];
      const std::string& support = supports[ws];
      const std::string& item = items[ws];
      std::vector<UpdateCommand> cmds;
      if (ws == 0) {
        ex.previous_action = "look";
        ex.observation = "you are in the " + room + " . there is a " + support +
                         " here . you see a " + item + " on the " + support + " .";
        cmds.push_back({UpdateCommand::Op::Add, "player", room, "in"});
      } else {
        ex.previous_action = "go west";
        ex.observation = "you go west and enter the " + room + " . there is a " +
                         support + " here . you see a " + item + " on the " +
                         support + " .";
        cmds.push_back({UpdateCommand::Op::Delete, "player", walkthrough.room, "in"});
        cmds.push_back({UpdateCommand::Op::Add, "player", room, "in"});
        cmds.push_back({UpdateCommand::Op::Add, room, walkthrough.room, "west_of"});
      }
      cmds.push_back({UpdateCommand::Op::Add, support, room, "in"});
      cmds.push_back({UpdateCommand::Op::Add, item, support, "on"});
      ex.target_commands = cmds;

      walkthrough.triples =
          apply_commands_label_level(walkthrough.triples, sort_commands(cmds));
      walkthrough.room = room;
      walkthrough.support = support;
      walkthrough.item = item;
      walkthrough.carried = false;
      out.push_back(ex);

      // Random steps branch from the walkthrough state.
      BranchState branch = walkthrough;
      std::mt19937_64 branch_rng(options.seed * 7919u + g * 131u + ws);
      for (int rs = 1; rs <= options.random_steps; ++rs) {
        RawExample rex;
        rex.game_id = game_id;
        rex.walkthrough_step = ws;
        rex.random_step = rs;
        rex.previous_graph = branch.triples;

        bool look = std::uniform_real_distribution<double>(0, 1)(branch_rng) < 0.3;
        std::vector<UpdateCommand> rcmds;
        if (look) {
          rex.previous_action = "look";
          rex.observation =
              "you look around the " + branch.room + " . nothing else happens .";
        } else if (!branch.carried) {
          rex.previous_action = "take " + branch.item;
          rex.observation = "you take the " + branch.item + " from the " +
                            branch.support + " .";
          rcmds.push_back({UpdateCommand::Op::Delete, branch.item, branch.support, "on"});
          rcmds.push_back({UpdateCommand::Op::Add, branch.item, "player", "carried"});
          branch.carried = true;
        } else {
          rex.previous_action = "put " + branch.item + " on " + branch.support;
          rex.observation = "you put the " + branch.item + " on the " +
                            branch.support + " .";
          rcmds.push_back({UpdateCommand::Op::Delete, branch.item, "player", "carried"});
          rcmds.push_back({UpdateCommand::Op::Add, branch.item, branch.support, "on"});
          branch.carried = false;
        }
        rex.target_commands = rcmds;
        branch.triples =
            apply_commands_label_level(branch.triples, sort_commands(rcmds));
        out.push_back(rex);
      }
    }
  }
  return out;
}

}  // namespace tkg::testing
