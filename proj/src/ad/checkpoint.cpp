#include "pairnas/ad/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "pairnas/error.hpp"

namespace pairnas::ad {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, int line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "'", line);
  return v;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& nt : tensors) {
    if (nt.name == name) return &nt.tensor;
  }
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write " + tmp);
    out << "pairnas-checkpoint " << kCheckpointVersion << '\n';
    for (const auto& [k, v] : ckpt.meta) {
      if (k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos) {
        throw ConfigError("checkpoint metadata must be single-line with a space-free key");
      }
      out << "meta " << k << ' ' << v << '\n';
    }
    for (const auto& nt : ckpt.tensors) {
      out << "tensor " << nt.name << ' ' << nt.tensor.rank();
      for (int d : nt.tensor.shape()) out << ' ' << d;
      out << '\n';
      bool first = true;
      for (double v : nt.tensor.data()) {
        if (!first) out << ' ';
        out << format_double(v);
        first = false;
      }
      out << '\n';
    }
    out << "end\n";
    if (!out) throw ConfigError("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  Checkpoint ckpt;
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty checkpoint", 1);
  ++lineno;
  {
    std::istringstream head(line);
    std::string magic;
    int version = 0;
    head >> magic >> version;
    if (magic != "pairnas-checkpoint") throw ParseError("not a checkpoint file", lineno);
    if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version", lineno);
  }
  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream rec(line);
    std::string kind;
    rec >> kind;
    if (kind == "meta") {
      std::string key;
      rec >> key;
      std::string value;
      std::getline(rec, value);
      if (!value.empty() && value[0] == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (kind == "tensor") {
      std::string name;
      int rank = 0;
      rec >> name >> rank;
      if (!rec || rank <= 0) throw ParseError("bad tensor header", lineno);
      Shape shape(rank);
      for (int& d : shape) {
        if (!(rec >> d) || d <= 0) throw ParseError("bad tensor dimension", lineno);
      }
      if (!std::getline(in, line)) throw ParseError("missing tensor values", lineno + 1);
      ++lineno;
      std::istringstream vals(line);
      std::vector<double> values;
      std::string tok;
      while (vals >> tok) values.push_back(parse_double(tok, lineno));
      if (values.size() != num_elements(shape)) throw ParseError("tensor " + name + " has wrong value count", lineno);
      ckpt.tensors.push_back({name, Tensor(shape, std::move(values))});
    } else {
      throw ParseError("unknown record '" + kind + "'", lineno);
    }
  }
  if (!ended) throw ParseError("truncated checkpoint", lineno);
  return ckpt;
}

void restore_values(const NamedTensors& dest, const Checkpoint& src) {
  for (const auto& nt : dest) {
    const Tensor* t = src.find(nt.name);
    if (!t) throw ConfigError("checkpoint lacks tensor " + nt.name);
    if (t->shape() != nt.tensor.shape()) throw DimensionError("checkpoint shape mismatch for " + nt.name);
    Tensor target = nt.tensor;
    auto out = target.mutable_data();
    std::copy(t->data().begin(), t->data().end(), out.begin());
  }
}

std::vector<std::vector<double>> snapshot_values(const NamedTensors& tensors) {
  std::vector<std::vector<double>> out;
  out.reserve(tensors.size());
  for (const auto& nt : tensors) out.emplace_back(nt.tensor.data().begin(), nt.tensor.data().end());
  return out;
}

void restore_snapshot(const NamedTensors& tensors, const std::vector<std::vector<double>>& values) {
  if (values.size() != tensors.size()) throw DimensionError("snapshot size mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Tensor t = tensors[i].tensor;
    auto out = t.mutable_data();
    if (out.size() != values[i].size()) throw DimensionError("snapshot shape mismatch");
    std::copy(values[i].begin(), values[i].end(), out.begin());
  }
}

}  // namespace pairnas::ad
