#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rollout/tree.hpp"

namespace rollout {

/// Header line of a persisted tree. Optional fields carry what allocator
/// training needs when trees are shipped without their environment.
struct TreeHeader {
  std::string prompt_id;
  std::string config_hash;
  std::vector<double> embedding;
  std::optional<bool> rescue_label;
};

struct TreeRecord {
  TreeHeader header;
  RolloutTree tree;
};

/// One header object followed by one object per node, each on its own line.
std::string tree_to_jsonl(const RolloutTree& tree, const TreeHeader& header);

void write_tree_jsonl(std::ostream& os, const RolloutTree& tree, const TreeHeader& header);

/// Reads every tree in a stream of concatenated records. Throws DomainError
/// on malformed input and StructuralError on inconsistent node records.
std::vector<TreeRecord> read_tree_corpus(std::istream& is);

}  // namespace rollout
