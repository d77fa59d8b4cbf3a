#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pairnas/ad/tensor.hpp"

namespace pairnas::cell {

enum class Activation { Tanh, Relu, Sigmoid, Identity };

inline constexpr std::array<Activation, 4> kActivations = {Activation::Tanh, Activation::Relu,
                                                           Activation::Sigmoid, Activation::Identity};
inline constexpr int kNumActivations = 4;
inline constexpr int kDefaultNodes = 6;

std::string_view activation_name(Activation op);
// Accepts exactly Tanh, Relu, Sigmoid, Identity.
Activation parse_activation(std::string_view name);
int activation_index(Activation op);
ad::Tensor apply_activation(Activation op, const ad::Tensor& x);

// Node l (1-based) reads the state of node `input`, which must be < l.
struct Link {
  int input = 0;
  Activation op = Activation::Tanh;
  friend bool operator==(const Link&, const Link&) = default;
  friend auto operator<=>(const Link&, const Link&) = default;
};

// The genotype of an N-node recurrent cell. links[l - 1] describes node l.
struct CellArchitecture {
  Activation node0_op = Activation::Tanh;
  std::vector<Link> links;

  int num_nodes() const { return static_cast<int>(links.size()) + 1; }
  // Throws ConfigError when a link's input index is out of range.
  void validate() const;
  // Nodes never consumed as an input by another node, ascending.
  std::vector<int> loose_ends() const;

  friend bool operator==(const CellArchitecture&, const CellArchitecture&) = default;
  friend auto operator<=>(const CellArchitecture&, const CellArchitecture&) = default;
};

// Text record: node-0 op followed by `input:op` per node, space separated,
// e.g. "Tanh 0:Relu 1:Relu 2:Relu 0:Relu 2:Relu".
std::string serialize(const CellArchitecture& arch);
// Throws ParseError on unknown op names, bad indices, or wrong arity.
CellArchitecture parse_architecture(std::string_view record, int num_nodes = kDefaultNodes);

// One record per line; blank lines and lines starting with '#' are skipped.
std::vector<CellArchitecture> read_architecture_file(const std::filesystem::path& path,
                                                     int num_nodes = kDefaultNodes);
void write_architecture_file(const std::filesystem::path& path, const std::vector<CellArchitecture>& archs);

// Tab-separated table with one numbered row per architecture and the
// columns "Node 0 Op", "Node 1 Input", "Node 1 Op", ... "Node N-1 Op".
std::string export_table(const std::vector<CellArchitecture>& archs);

// Every decision independent and uniform over its valid choices.
CellArchitecture sample_uniform(std::mt19937_64& rng, int num_nodes = kDefaultNodes);

// 4 * prod_{l=1}^{N-1} (4 l)
std::uint64_t enumerate_count(int num_nodes = kDefaultNodes);
std::vector<CellArchitecture> enumerate_all(int num_nodes);

}  // namespace pairnas::cell
