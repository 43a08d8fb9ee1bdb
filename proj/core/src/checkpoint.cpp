#include "hmtl/checkpoint.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hmtl/error.hpp"

namespace hmtl {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "hmtl-checkpoint";
constexpr int kVersion = 1;

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

std::string file_name(const std::string& param) {
  std::string out;
  for (char c : param) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_') ? c : '_';
  return out + ".bin";
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const float f = static_cast<float>(m(r, c));
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      bits = to_little(bits);
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
}

Matrix read_matrix(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      std::uint32_t bits = 0;
      if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
        throw std::runtime_error("truncated parameter file " + path.string());
      }
      bits = to_little(bits);
      float f;
      std::memcpy(&f, &bits, sizeof f);
      m(r, c) = f;
    }
  }
  return m;
}

}  // namespace

int group_level(Group group, const HierarchyWiring& wiring) {
  switch (group) {
    case Group::kEmbeddings: return 0;
    case Group::kNer: return wiring.level(Task::kNer);
    case Group::kEmd: return wiring.level(Task::kEmd);
    case Group::kCoref: return wiring.level(Task::kCoref);
    case Group::kRelation: return wiring.level(Task::kRelation);
  }
  return 0;
}

void save_checkpoint(const std::filesystem::path& dir, const HierarchicalModel& model,
                     const RunConfig& config) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format"] = kFormat;
  manifest["version"] = kVersion;
  manifest["config"] = config.resolved();
  manifest["vocabulary"] = model.words().entries();
  manifest["characters"] = model.chars().entries();
  manifest["labels"] = {{"ner", model.labels().ner},
                        {"emd", model.labels().emd},
                        {"relation", model.labels().relation}};
  json params = json::array();
  const ParameterStore& store = model.parameters();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Parameter& p = store[i];
    const std::string file = file_name(p.name);
    write_matrix(dir / file, p.value);
    params.push_back({{"name", p.name},
                      {"shape", {p.value.rows(), p.value.cols()}},
                      {"group", group_name(p.group)},
                      {"level", group_level(p.group, model.wiring())},
                      {"file", file}});
  }
  manifest["parameters"] = std::move(params);
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir, const std::vector<std::string>& overrides) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("no manifest.json in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest.json: ") + e.what());
  }
  if (manifest.value("format", "") != kFormat) throw ParseError("not an hmtl checkpoint: " + dir.string());

  RunConfig config;
  const auto stored = manifest.at("config").get<std::map<std::string, std::string>>();
  if (auto it = stored.find("setup"); it != stored.end()) apply_setting(config, "setup", it->second);
  for (const auto& [k, v] : stored) {
    if (k != "setup") apply_setting(config, k, v);
  }
  for (const auto& o : overrides) apply_override(config, o);
  config.validate();

  Vocabulary words(manifest.at("vocabulary").get<std::vector<std::string>>());
  Vocabulary chars(manifest.at("characters").get<std::vector<std::string>>());
  LabelSets labels;
  labels.ner = manifest.at("labels").at("ner").get<std::vector<std::string>>();
  labels.emd = manifest.at("labels").at("emd").get<std::vector<std::string>>();
  labels.relation = manifest.at("labels").at("relation").get<std::vector<std::string>>();

  HierarchicalModel model(config.model, std::move(words), std::move(chars), std::move(labels), config.seed);
  ParameterStore& store = model.parameters();
  std::size_t loaded = 0;
  for (const auto& entry : manifest.at("parameters")) {
    const std::string name = entry.at("name").get<std::string>();
    Parameter* p = store.find(name);
    if (p == nullptr) throw DimensionError("checkpoint parameter '" + name + "' has no counterpart in the model");
    const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
    const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw DimensionError("parameter '" + name + "' is " + std::to_string(rows) + "x" + std::to_string(cols) +
                           " in the checkpoint but " + std::to_string(p->value.rows()) + "x" +
                           std::to_string(p->value.cols()) + " in the model");
    }
    p->value = read_matrix(dir / entry.at("file").get<std::string>(), rows, cols);
    ++loaded;
  }
  if (loaded != store.size()) throw DimensionError("checkpoint is missing model parameters");
  return LoadedCheckpoint{std::move(config), std::move(model)};
}

}  // namespace hmtl
