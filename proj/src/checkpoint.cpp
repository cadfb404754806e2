#include "mtlmol/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mtlmol/csv.hpp"

namespace mtlmol {
namespace {

constexpr std::string_view kConfigPrefix = "config.";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

[[noreturn]] void mismatch(const std::string& why) { throw NumericError("CheckpointMismatch", why); }

std::map<std::string, std::string> config_to_meta(const ModelConfig& c) {
  return {
      {"num_tasks", std::to_string(c.num_tasks)},
      {"hidden", std::to_string(c.encoder.hidden)},
      {"depth", std::to_string(c.encoder.depth)},
      {"dropout", csv::format_double(c.encoder.dropout)},
      {"ffn_hidden", std::to_string(c.ffn_hidden)},
      {"variant", to_string(c.variant)},
      {"uniform_weighting", c.uniform_weighting ? "1" : "0"},
      {"renormalize_weights", c.renormalize_weights ? "1" : "0"},
      {"beta_min", csv::format_double(c.beta_min)},
      {"beta_max", csv::format_double(c.beta_max)},
  };
}

ModelConfig config_from_meta(const std::map<std::string, std::string>& m) {
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = m.find(k);
    if (it == m.end()) mismatch("checkpoint lacks config." + k);
    return it->second;
  };
  auto num = [&](const std::string& k) {
    const auto v = csv::parse_double(get(k));
    if (!v) mismatch("config." + k + " is not numeric");
    return *v;
  };
  ModelConfig c;
  c.num_tasks = static_cast<std::size_t>(num("num_tasks"));
  c.encoder.hidden = static_cast<int>(num("hidden"));
  c.encoder.depth = static_cast<int>(num("depth"));
  c.encoder.dropout = num("dropout");
  c.ffn_hidden = static_cast<int>(num("ffn_hidden"));
  const auto v = parse_variant(get("variant"));
  if (!v) mismatch("unknown variant '" + get("variant") + "'");
  c.variant = *v;
  c.uniform_weighting = get("uniform_weighting") == "1";
  c.renormalize_weights = get("renormalize_weights") == "1";
  c.beta_min = num("beta_min");
  c.beta_max = num("beta_max");
  return c;
}

void write_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<unsigned char>(bits & 0xffu);
    bits >>= 8;
  }
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[i];
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kCheckpointMagic << '\n';
  for (const auto& [k, v] : config_to_meta(ckpt.config)) out << "meta\t" << kConfigPrefix << k << '\t' << v << '\n';
  for (const auto& [k, v] : ckpt.meta) out << "meta\t" << k << '\t' << v << '\n';
  for (const auto& t : ckpt.tasks) {
    out << "task\t" << t.name << '\t' << to_string(t.metric) << '\t' << t.label_column << '\t'
        << t.split_column << '\n';
  }

  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) tensors.emplace_back(ckpt.params.name(i), &ckpt.params.at(i));
  const Standardizer& s = ckpt.standardizer;
  const Tensor phys_mean = Tensor::row(s.phys_mean), phys_std = Tensor::row(s.phys_std);
  const Tensor qc_mean = Tensor::row({s.qc_mean.begin(), s.qc_mean.end()});
  const Tensor qc_std = Tensor::row({s.qc_std.begin(), s.qc_std.end()});
  tensors.emplace_back("standardizer.phys_mean", &phys_mean);
  tensors.emplace_back("standardizer.phys_std", &phys_std);
  tensors.emplace_back("standardizer.qc_mean", &qc_mean);
  tensors.emplace_back("standardizer.qc_std", &qc_std);

  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    out << "tensor\t" << name << '\t' << t->rows() << '\t' << t->cols() << '\t' << offset << '\n';
    offset += t->size();
  }
  out << "end\n";
  for (const auto& [name, t] : tensors) {
    for (double v : t->values()) write_le(out, v);
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("FileNotWritable", path.string());
  write_checkpoint(out, ckpt);
  if (!out) throw DataError("FileNotWritable", path.string());
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) mismatch("missing MTLMOLNET-CKPT-1 header");

  struct Entry {
    std::string name;
    std::size_t rows, cols, offset;
  };
  std::vector<Entry> entries;
  std::map<std::string, std::string> meta;
  Checkpoint ckpt;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    const auto f = split_tabs(line);
    if (f[0] == "meta" && f.size() == 3) {
      meta[f[1]] = f[2];
    } else if (f[0] == "task" && f.size() == 5) {
      const auto m = parse_metric(f[2]);
      if (!m) mismatch("bad task metric '" + f[2] + "'");
      ckpt.tasks.push_back({f[1], *m, f[3], f[4]});
    } else if (f[0] == "tensor" && f.size() == 5) {
      const auto r = csv::parse_double(f[2]), c = csv::parse_double(f[3]), o = csv::parse_double(f[4]);
      if (!r || !c || !o) mismatch("bad tensor line '" + line + "'");
      entries.push_back({f[1], static_cast<std::size_t>(*r), static_cast<std::size_t>(*c),
                         static_cast<std::size_t>(*o)});
    } else {
      mismatch("unrecognized manifest line '" + line + "'");
    }
  }
  if (!ended) mismatch("manifest not terminated");

  std::size_t total = 0;
  for (const auto& e : entries) {
    if (e.offset != total) mismatch("tensor " + e.name + " has a non-contiguous offset");
    total += e.rows * e.cols;
  }
  std::vector<unsigned char> raw(total * 8);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) mismatch("tensor data truncated");

  for (auto& [k, v] : meta) {
    if (k.rfind(kConfigPrefix, 0) != 0) ckpt.meta[k] = v;
  }
  std::map<std::string, std::string> config_meta;
  for (auto& [k, v] : meta) {
    if (k.rfind(kConfigPrefix, 0) == 0) config_meta[k.substr(kConfigPrefix.size())] = v;
  }
  ckpt.config = config_from_meta(config_meta);

  for (const auto& e : entries) {
    std::vector<double> values(e.rows * e.cols);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = read_le(raw.data() + (e.offset + i) * 8);
    Tensor t(e.rows, e.cols, std::move(values));
    if (e.name == "standardizer.phys_mean") {
      ckpt.standardizer.phys_mean = t.storage();
    } else if (e.name == "standardizer.phys_std") {
      ckpt.standardizer.phys_std = t.storage();
    } else if (e.name == "standardizer.qc_mean" || e.name == "standardizer.qc_std") {
      if (t.size() != kQcDim) mismatch(e.name + " must have 4 values");
      auto& dst = e.name == "standardizer.qc_mean" ? ckpt.standardizer.qc_mean : ckpt.standardizer.qc_std;
      std::copy(t.values().begin(), t.values().end(), dst.begin());
    } else {
      ckpt.params.add(e.name, std::move(t));
    }
  }
  if (ckpt.tasks.size() != ckpt.config.num_tasks) mismatch("task list does not match config.num_tasks");

  // Shape audit against a fresh initialisation of the recorded config.
  const ParamStore ref = init_params(ckpt.config, 0);
  if (ref.size() != ckpt.params.size()) mismatch("parameter tensor count does not match config");
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref.name(i) != ckpt.params.name(i) || !ref.at(i).same_shape(ckpt.params.at(i))) {
      mismatch("tensor " + ckpt.params.name(i) + " " + ckpt.params.at(i).shape_string() +
               " does not match config (" + ref.name(i) + " " + ref.at(i).shape_string() + ")");
    }
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("FileNotFound", path.string());
  return read_checkpoint(in);
}

}  // namespace mtlmol
