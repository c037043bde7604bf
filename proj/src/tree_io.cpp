#include "rollout/tree_io.hpp"

#include <istream>
#include <json.hpp>
#include <ostream>

#include "rollout/errors.hpp"

namespace rollout {

namespace {

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::success:
      return "success";
    case Outcome::fail:
      return "fail";
    case Outcome::none:
      break;
  }
  return "none";
}

Outcome parse_outcome(const std::string& s) {
  if (s == "success") return Outcome::success;
  if (s == "fail") return Outcome::fail;
  if (s == "none") return Outcome::none;
  throw DomainError("unknown outcome label '" + s + "'");
}

struct Pending {
  TreeHeader header;
  TreeLimits limits;
  int budget_used = 0;
  std::uint64_t version = 0;
  std::vector<TreeNode> nodes;
};

}  // namespace

std::string tree_to_jsonl(const RolloutTree& tree, const TreeHeader& header) {
  std::string out;
  nlohmann::json h;
  h["prompt_id"] = header.prompt_id;
  h["budget_used"] = tree.budget_used();
  h["config_hash"] = header.config_hash;
  h["version"] = tree.version();
  h["depth_cap"] = tree.limits().depth_cap;
  h["tool_cap"] = tree.limits().tool_cap;
  h["branching_cap"] = tree.limits().branching_cap;
  if (!header.embedding.empty()) h["embedding"] = header.embedding;
  if (header.rescue_label) h["rescue_label"] = *header.rescue_label;
  out += h.dump() + "\n";
  for (const TreeNode& n : tree.nodes()) {
    nlohmann::json j;
    j["id"] = index(n.id);
    j["parent"] = n.parent ? nlohmann::json(index(*n.parent)) : nlohmann::json(nullptr);
    j["depth"] = n.depth;
    j["N"] = n.visits;
    j["q_mean"] = n.q_mean();
    j["entropy"] = n.entropy;
    j["cost"] = n.path_cost;
    j["outcome"] = outcome_name(n.outcome);
    j["version"] = n.version;
    j["reward_sum"] = n.reward_sum;
    j["state"] = n.state;
    j["action"] = n.action;
    j["tool_capped"] = n.tool_capped;
    out += j.dump() + "\n";
  }
  return out;
}

void write_tree_jsonl(std::ostream& os, const RolloutTree& tree, const TreeHeader& header) {
  os << tree_to_jsonl(tree, header);
}

std::vector<TreeRecord> read_tree_corpus(std::istream& is) {
  std::vector<TreeRecord> out;
  std::optional<Pending> cur;
  auto flush = [&] {
    if (!cur) return;
    RolloutTree t = RolloutTree::from_records(cur->limits, std::move(cur->nodes), cur->budget_used, cur->version);
    if (t.leaves().size() != static_cast<std::size_t>(cur->budget_used))
      throw StructuralError("leaf count disagrees with budget_used in tree '" + cur->header.prompt_id + "'");
    out.push_back({std::move(cur->header), std::move(t)});
    cur.reset();
  };

  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw DomainError("line " + std::to_string(lineno) + " is not valid JSON");
    }
    try {
      if (j.contains("prompt_id")) {
        flush();
        Pending p;
        p.header.prompt_id = j.at("prompt_id").get<std::string>();
        p.header.config_hash = j.value("config_hash", std::string{});
        if (j.contains("embedding")) p.header.embedding = j["embedding"].get<std::vector<double>>();
        if (j.contains("rescue_label")) p.header.rescue_label = j["rescue_label"].get<bool>();
        p.budget_used = j.at("budget_used").get<int>();
        p.version = j.value("version", std::uint64_t{0});
        p.limits.depth_cap = j.value("depth_cap", 6);
        p.limits.tool_cap = j.value("tool_cap", 5);
        p.limits.branching_cap = j.value("branching_cap", 8);
        cur = std::move(p);
        continue;
      }
      if (!cur) throw DomainError("node record before any header on line " + std::to_string(lineno));
      TreeNode n;
      n.id = to_node_id(j.at("id").get<std::size_t>());
      if (!j.at("parent").is_null()) n.parent = to_node_id(j["parent"].get<std::size_t>());
      n.depth = j.at("depth").get<int>();
      n.visits = j.at("N").get<int>();
      n.reward_sum = j.contains("reward_sum") ? j["reward_sum"].get<double>() : j.at("q_mean").get<double>() * n.visits;
      n.entropy = j.at("entropy").get<double>();
      n.path_cost = j.at("cost").get<int>();
      n.outcome = parse_outcome(j.at("outcome").get<std::string>());
      n.version = j.at("version").get<std::uint64_t>();
      n.state = j.value("state", 0);
      n.action = j.value("action", -1);
      n.tool_capped = j.value("tool_capped", false);
      cur->nodes.push_back(std::move(n));
    } catch (const nlohmann::json::exception& e) {
      throw DomainError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  flush();
  return out;
}

}  // namespace rollout
