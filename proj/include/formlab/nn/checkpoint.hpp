#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "formlab/nn/binary_io.hpp"
#include "formlab/nn/dense_net.hpp"

namespace formlab::nn {

// Checkpoint framing for one network:
//
//   FORMNET v1\n
//   layers=<L> sizes=<in>,<out_1>,...,<out_L> act=<a_1>,...,<a_L> ln=<0|1>,... params=<P>\n
//   <P little-endian float64 values in flat layer order>
//
// Several networks may follow each other in one stream.

namespace detail {
template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += f(v[i]);
  }
  return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

inline std::map<std::string, std::string> parse_record(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) throw StructuralError("malformed checkpoint record token '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}
}  // namespace detail

inline void write_net(std::ostream& os, const DenseNet& net) {
  const auto& specs = net.specs();
  std::vector<int> sizes{net.input_dim()};
  for (const auto& s : specs) sizes.push_back(s.out);
  os << "FORMNET v1\n";
  os << "layers=" << specs.size() << " sizes=" << detail::join(sizes, [](int v) { return std::to_string(v); })
     << " act=" << detail::join(specs, [](const LayerSpec& s) { return to_string(s.act); })
     << " ln=" << detail::join(specs, [](const LayerSpec& s) { return std::string(s.layer_norm ? "1" : "0"); })
     << " params=" << net.num_params() << "\n";
  for (Eigen::Index i = 0; i < net.num_params(); ++i) io::write_f64(os, net.params()(i));
}

inline DenseNet read_net(std::istream& is) {
  if (io::read_line(is) != "FORMNET v1") throw StructuralError("checkpoint header is not 'FORMNET v1'");
  auto kv = detail::parse_record(io::read_line(is));
  for (const char* key : {"layers", "sizes", "act", "ln", "params"})
    if (!kv.count(key)) throw StructuralError(std::string("checkpoint record missing '") + key + "'");
  const auto sizes = detail::split(kv["sizes"], ',');
  const auto acts = detail::split(kv["act"], ',');
  const auto lns = detail::split(kv["ln"], ',');
  const std::size_t layers = std::stoul(kv["layers"]);
  if (sizes.size() != layers + 1 || acts.size() != layers || lns.size() != layers)
    throw StructuralError("checkpoint record lists inconsistent layer counts");
  std::vector<LayerSpec> specs;
  for (std::size_t l = 0; l < layers; ++l)
    specs.push_back({std::stoi(sizes[l]), std::stoi(sizes[l + 1]), activation_from_string(acts[l]), lns[l] == "1"});
  DenseNet net(std::move(specs));
  const long long count = std::stoll(kv["params"]);
  if (count != net.num_params()) throw StructuralError("checkpoint parameter count does not match layer sizes");
  Vec p(count);
  for (long long i = 0; i < count; ++i) p(i) = io::read_f64(is);
  net.set_params(p);
  return net;
}

}  // namespace formlab::nn
