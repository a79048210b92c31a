#include "tsact/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tsact/error.hpp"

namespace tsact {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'T', 'S', 'A', 'C', 'K', 'P', 'T', '\0'};

struct TensorTable {
  nlohmann::json entries = nlohmann::json::array();
  std::vector<const Array*> arrays;
  std::size_t offset = 0;

  void add(const std::string& name, const Array& a) {
    entries.push_back({{"name", name}, {"shape", a.shape()}, {"offset", offset}});
    arrays.push_back(&a);
    offset += a.size();
  }
};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  TensorTable table;
  for (std::size_t i = 0; i < ckpt.state.params.size(); ++i) {
    table.add("param/" + ckpt.state.names[i], ckpt.state.params[i]);
  }
  for (std::size_t i = 0; i < ckpt.state.norm_stats.size(); ++i) {
    table.add("norm/" + std::to_string(i) + "/mean", ckpt.state.norm_stats[i].mean);
    table.add("norm/" + std::to_string(i) + "/var", ckpt.state.norm_stats[i].var);
  }
  nlohmann::json header = {{"spec", to_json(ckpt.spec)}, {"seed", ckpt.seed}};
  if (ckpt.optimizer) {
    const auto& o = *ckpt.optimizer;
    header["optimizer"] = {{"kind", optimizer_name(o.kind)},
                           {"step", o.step},
                           {"lr", o.hyper.lr},
                           {"beta1", o.hyper.beta1},
                           {"beta2", o.hyper.beta2},
                           {"rho", o.hyper.rho},
                           {"eps", o.hyper.eps}};
    for (std::size_t i = 0; i < o.first.size(); ++i) {
      table.add("opt/first/" + std::to_string(i), o.first[i]);
      table.add("opt/second/" + std::to_string(i), o.second[i]);
    }
  }
  header["tensors"] = table.entries;
  const std::string text = header.dump();

  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Array* a : table.arrays) {
    out.write(reinterpret_cast<const char*>(a->ptr()),
              static_cast<std::streamsize>(a->size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path.string() + " is not a checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = read_pod<std::uint64_t>(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("truncated checkpoint header");
  const auto header = nlohmann::json::parse(text);

  Checkpoint ck;
  ck.spec = model_spec_from_json(header.at("spec"));
  ck.seed = header.at("seed").get<std::uint64_t>();

  std::vector<std::pair<std::string, Array>> tensors;
  for (const auto& e : header.at("tensors")) {
    Array a(e.at("shape").get<Shape>());
    in.read(reinterpret_cast<char*>(a.ptr()), static_cast<std::streamsize>(a.size() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint payload");
    tensors.emplace_back(e.at("name").get<std::string>(), std::move(a));
  }

  std::vector<Array> first, second;
  for (auto& [name, a] : tensors) {
    if (name.rfind("param/", 0) == 0) {
      ck.state.names.push_back(name.substr(6));
      ck.state.params.push_back(std::move(a));
    } else if (name.rfind("norm/", 0) == 0) {
      const auto idx = std::stoul(name.substr(5));
      if (ck.state.norm_stats.size() <= idx) ck.state.norm_stats.resize(idx + 1);
      if (name.ends_with("/mean")) {
        ck.state.norm_stats[idx].mean = std::move(a);
      } else {
        ck.state.norm_stats[idx].var = std::move(a);
      }
    } else if (name.rfind("opt/first/", 0) == 0) {
      first.push_back(std::move(a));
    } else if (name.rfind("opt/second/", 0) == 0) {
      second.push_back(std::move(a));
    }
  }
  if (header.contains("optimizer")) {
    const auto& o = header.at("optimizer");
    OptimizerState s;
    s.kind = parse_optimizer(o.at("kind").get<std::string>());
    s.step = o.at("step").get<std::uint64_t>();
    s.hyper.lr = o.at("lr").get<double>();
    s.hyper.beta1 = o.at("beta1").get<double>();
    s.hyper.beta2 = o.at("beta2").get<double>();
    s.hyper.rho = o.at("rho").get<double>();
    s.hyper.eps = o.at("eps").get<double>();
    s.first = std::move(first);
    s.second = std::move(second);
    ck.optimizer = std::move(s);
  }
  return ck;
}

}  // namespace tsact
