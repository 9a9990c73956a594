#include "kmp/model/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>

#include "kmp/error.hpp"

namespace kmp {

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian");

namespace {

constexpr const char* kMagic = "kmp-checkpoint 1";

std::string join(const auto& values) {
  std::string out;
  for (auto v : values) {
    if (!out.empty()) out += ",";
    out += std::to_string(v);
  }
  return out;
}

std::vector<std::size_t> split_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  if (text == "-") return out;  // scalar
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw ConfigError("bad size list '" + text + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError("config '" + key + "': expected true/false, got '" + value + "'");
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_entries(const ModelConfig& c) {
  char dropout[32];
  const auto end = std::to_chars(dropout, dropout + sizeof dropout, c.gcn_dropout).ptr;
  return {{"graph_branch", c.graph_branch ? "true" : "false"},
          {"mode", std::string(to_string(c.mode))},
          {"include_head", c.include_head ? "true" : "false"},
          {"kinematics", c.kinematics.to_string()},
          {"stripes", std::to_string(c.stripes)},
          {"channels", join(c.channels)},
          {"embed_dim", std::to_string(c.embed_dim)},
          {"n_classes", std::to_string(c.n_classes)},
          {"mlp_hidden", std::to_string(c.mlp_hidden)},
          {"gcn_dropout", std::string(dropout, end)},
          {"stage_blocks", join(c.stage_blocks)},
          {"image_height", std::to_string(c.image_height)},
          {"image_width", std::to_string(c.image_width)}};
}

void apply_config_entry(ModelConfig& c, const std::string& key, const std::string& value) {
  if (key == "graph_branch")
    c.graph_branch = parse_bool(key, value);
  else if (key == "mode")
    c.mode = parse_graph_mode(value);
  else if (key == "include_head")
    c.include_head = parse_bool(key, value);
  else if (key == "kinematics")
    c.kinematics = KinematicsKinds::parse(value);
  else if (key == "stripes")
    c.stripes = parse_size(key, value);
  else if (key == "embed_dim")
    c.embed_dim = parse_size(key, value);
  else if (key == "n_classes")
    c.n_classes = parse_size(key, value);
  else if (key == "mlp_hidden")
    c.mlp_hidden = parse_size(key, value);
  else if (key == "image_height")
    c.image_height = parse_size(key, value);
  else if (key == "image_width")
    c.image_width = parse_size(key, value);
  else if (key == "gcn_dropout") {
    double v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size() || !(v >= 0.0 && v < 1.0)) {
      throw ConfigError("config 'gcn_dropout': expected a value in [0, 1), got '" + value + "'");
    }
    c.gcn_dropout = v;
  } else if (key == "channels") {
    auto v = split_sizes(value);
    if (v.size() != c.channels.size()) throw ConfigError("config 'channels': need 5 values");
    std::copy(v.begin(), v.end(), c.channels.begin());
  } else if (key == "stage_blocks") {
    auto v = split_sizes(value);
    if (v.size() != c.stage_blocks.size())
      throw ConfigError("config 'stage_blocks': need 4 values");
    std::copy(v.begin(), v.end(), c.stage_blocks.begin());
  } else {
    throw ConfigError("unknown model config key '" + key + "'");
  }
}

void save_checkpoint(const ModelConfig& config, const ParameterStore& params,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  std::ofstream blob(dir / "params.bin", std::ios::binary);
  if (!manifest || !blob) throw IoError("cannot write checkpoint to " + dir.string());
  manifest << kMagic << "\n";
  for (const auto& [k, v] : config_entries(config)) manifest << "config " << k << " " << v << "\n";
  std::size_t offset = 0;
  for (const auto& p : params.all()) {
    const auto data = p.tensor.data();
    const std::string dims = p.tensor.rank() == 0 ? "-" : join(p.tensor.shape());
    manifest << "param " << p.name << " " << dims << " " << offset << " " << data.size() << "\n";
    blob.write(reinterpret_cast<const char*>(data.data()),
               static_cast<std::streamsize>(data.size() * sizeof(double)));
    offset += data.size() * sizeof(double);
  }
  if (!manifest || !blob) throw IoError("failed writing checkpoint " + dir.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  std::ifstream blob(dir / "params.bin", std::ios::binary);
  if (!manifest || !blob) throw IoError("cannot read checkpoint " + dir.string());
  Checkpoint ck;
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(manifest, line) || line != kMagic) {
    throw ParseError(1, "expected '" + std::string(kMagic) + "' in " + dir.string());
  }
  std::size_t expected_offset = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string kind, key, value;
    ss >> kind >> key >> value;
    if (kind == "config") {
      try {
        apply_config_entry(ck.config, key, value);
      } catch (const ConfigError& e) {
        throw ParseError(line_no, e.what());
      }
    } else if (kind == "param") {
      std::size_t offset = 0, count = 0;
      if (!(ss >> offset >> count)) throw ParseError(line_no, "malformed param entry");
      Shape shape;
      try {
        shape = split_sizes(value);
      } catch (const ConfigError& e) {
        throw ParseError(line_no, e.what());
      }
      if (shape_numel(shape) != count || offset != expected_offset) {
        throw IntegrityError("checkpoint entry '" + key + "' is inconsistent");
      }
      std::vector<double> data(count);
      blob.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
      if (static_cast<std::size_t>(blob.gcount()) != count * sizeof(double)) {
        throw IntegrityError("params.bin truncated at '" + key + "'");
      }
      expected_offset += count * sizeof(double);
      ck.params.add(key, Tensor(std::move(shape), std::move(data)));
    } else {
      throw ParseError(line_no, "unknown entry '" + kind + "'");
    }
  }
  if (blob.peek() != std::char_traits<char>::eof()) {
    throw IntegrityError("params.bin has trailing data");
  }
  return ck;
}

std::unique_ptr<KmpNet> load_model(const std::filesystem::path& dir) {
  Checkpoint ck = load_checkpoint(dir);
  auto net = std::make_unique<KmpNet>(ck.config, 0);
  const std::size_t copied = net->load_matching(ck.params);
  if (copied != net->params().all().size()) {
    for (const auto& p : net->params().all()) {
      if (!ck.params.contains(p.name)) {
        throw IntegrityError("checkpoint " + dir.string() + " is missing parameter '" + p.name +
                             "'");
      }
    }
  }
  return net;
}

void export_visual_only(const KmpNet& net, const std::filesystem::path& dir) {
  ModelConfig config = net.config();
  config.graph_branch = false;
  ParameterStore visual;
  for (const auto& p : net.params().with_prefix(kVisualPrefix)) visual.add(p.name, p.tensor);
  // The exported net must be complete on its own.
  KmpNet probe(config, 0);
  for (const auto& p : probe.params().all()) {
    if (!visual.contains(p.name)) {
      throw IntegrityError("export: visual parameter '" + p.name + "' is missing");
    }
  }
  save_checkpoint(config, visual, dir);
}

void export_visual_only(const std::filesystem::path& in, const std::filesystem::path& out) {
  export_visual_only(*load_model(in), out);
}

std::uintmax_t checkpoint_bytes(const std::filesystem::path& dir) {
  std::uintmax_t total = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) total += entry.file_size();
  }
  return total;
}

}  // namespace kmp
