#include "pairnas/cell/architecture.hpp"

#include <fstream>
#include <sstream>

#include "pairnas/ad/ops.hpp"
#include "pairnas/error.hpp"

namespace pairnas::cell {

std::string_view activation_name(Activation op) {
  switch (op) {
    case Activation::Tanh: return "Tanh";
    case Activation::Relu: return "Relu";
    case Activation::Sigmoid: return "Sigmoid";
    case Activation::Identity: return "Identity";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  for (Activation op : kActivations) {
    if (activation_name(op) == name) return op;
  }
  throw ParseError("unknown activation '" + std::string(name) + "'");
}

int activation_index(Activation op) { return static_cast<int>(op); }

ad::Tensor apply_activation(Activation op, const ad::Tensor& x) {
  switch (op) {
    case Activation::Tanh: return ad::tanh(x);
    case Activation::Relu: return ad::relu(x);
    case Activation::Sigmoid: return ad::sigmoid(x);
    case Activation::Identity: return ad::elementwise(ad::UnaryOp::Identity, x);
  }
  return x;
}

void CellArchitecture::validate() const {
  for (std::size_t i = 0; i < links.size(); ++i) {
    const int node = static_cast<int>(i) + 1;
    if (links[i].input < 0 || links[i].input >= node) {
      throw ConfigError("node " + std::to_string(node) + " has input index " + std::to_string(links[i].input) +
                        ", must be in [0, " + std::to_string(node - 1) + "]");
    }
  }
}

std::vector<int> CellArchitecture::loose_ends() const {
  std::vector<bool> used(num_nodes(), false);
  for (const auto& l : links) used[l.input] = true;
  std::vector<int> out;
  for (int n = 0; n < num_nodes(); ++n) {
    if (!used[n]) out.push_back(n);
  }
  return out;
}

std::string serialize(const CellArchitecture& arch) {
  std::string out(activation_name(arch.node0_op));
  for (const auto& l : arch.links) {
    out += ' ';
    out += std::to_string(l.input);
    out += ':';
    out += activation_name(l.op);
  }
  return out;
}

CellArchitecture parse_architecture(std::string_view record, int num_nodes) {
  std::istringstream in{std::string(record)};
  std::vector<std::string> fields;
  for (std::string tok; in >> tok;) fields.push_back(tok);
  if (static_cast<int>(fields.size()) != num_nodes) {
    throw ParseError("expected " + std::to_string(num_nodes) + " fields, got " + std::to_string(fields.size()));
  }
  CellArchitecture arch;
  arch.node0_op = parse_activation(fields[0]);
  for (int node = 1; node < num_nodes; ++node) {
    const std::string& f = fields[node];
    const auto colon = f.find(':');
    if (colon == std::string::npos) throw ParseError("field '" + f + "' is not input:op");
    const std::string idx = f.substr(0, colon);
    if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos) {
      throw ParseError("bad input index '" + idx + "'");
    }
    const int input = std::stoi(idx);
    if (input >= node) {
      throw ParseError("input index " + idx + " out of range at node " + std::to_string(node));
    }
    arch.links.push_back({input, parse_activation(f.substr(colon + 1))});
  }
  return arch;
}

std::vector<CellArchitecture> read_architecture_file(const std::filesystem::path& path, int num_nodes) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open architecture file " + path.string());
  std::vector<CellArchitecture> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      out.push_back(parse_architecture(line, num_nodes));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

void write_architecture_file(const std::filesystem::path& path, const std::vector<CellArchitecture>& archs) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write architecture file " + path.string());
  for (const auto& a : archs) out << serialize(a) << '\n';
}

std::string export_table(const std::vector<CellArchitecture>& archs) {
  std::ostringstream out;
  const int nodes = archs.empty() ? kDefaultNodes : archs.front().num_nodes();
  out << "#\tNode 0 Op";
  for (int n = 1; n < nodes; ++n) out << "\tNode " << n << " Input\tNode " << n << " Op";
  out << '\n';
  for (std::size_t i = 0; i < archs.size(); ++i) {
    out << (i + 1) << '\t' << activation_name(archs[i].node0_op);
    for (const auto& l : archs[i].links) out << '\t' << l.input << '\t' << activation_name(l.op);
    out << '\n';
  }
  return out.str();
}

CellArchitecture sample_uniform(std::mt19937_64& rng, int num_nodes) {
  std::uniform_int_distribution<int> op_dist(0, kNumActivations - 1);
  CellArchitecture arch;
  arch.node0_op = kActivations[op_dist(rng)];
  for (int node = 1; node < num_nodes; ++node) {
    std::uniform_int_distribution<int> input_dist(0, node - 1);
    const int input = input_dist(rng);
    arch.links.push_back({input, kActivations[op_dist(rng)]});
  }
  return arch;
}

std::uint64_t enumerate_count(int num_nodes) {
  if (num_nodes < 1) throw ConfigError("cell needs at least one node");
  std::uint64_t count = kNumActivations;
  for (int node = 1; node < num_nodes; ++node) count *= static_cast<std::uint64_t>(kNumActivations * node);
  return count;
}

std::vector<CellArchitecture> enumerate_all(int num_nodes) {
  std::vector<CellArchitecture> out;
  for (Activation op : kActivations) out.push_back({op, {}});
  for (int node = 1; node < num_nodes; ++node) {
    std::vector<CellArchitecture> next;
    next.reserve(out.size() * node * kNumActivations);
    for (const auto& prefix : out)
      for (int input = 0; input < node; ++input)
        for (Activation op : kActivations) {
          CellArchitecture a = prefix;
          a.links.push_back({input, op});
          next.push_back(std::move(a));
        }
    out = std::move(next);
  }
  return out;
}

}  // namespace pairnas::cell
