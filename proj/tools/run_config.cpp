#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>
#include <vector>

#include "kmp/error.hpp"
#include "kmp/model/checkpoint.hpp"

namespace kmp::app {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("'" + key + "': cannot parse '" + value + "' as a number");
  }
  return v;
}

bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + value + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  if (value == "none" || value.empty()) return out;
  std::istringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(key, trim(item)));
  return out;
}

std::string format_list(const std::vector<std::size_t>& values) {
  if (values.empty()) return "none";
  std::string out;
  for (std::size_t v : values) out += (out.empty() ? "" : ",") + std::to_string(v);
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

// `access` is a generic lambda returning a reference to the member, so it
// serves both the const getter and the setter.
template <typename Access>
Field numeric(std::string section, std::string key, Access access) {
  return {section, key,
          [access](const RunConfig& c) {
            const auto& v = access(c);
            if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>)
              return fmt(v);
            else
              return std::to_string(v);
          },
          [access, key](RunConfig& c, const std::string& v) {
            auto& dst = access(c);
            dst = parse_number<std::decay_t<decltype(dst)>>(key, v);
          }};
}

template <typename Access>
Field flag(std::string section, std::string key, Access access) {
  return {section, key,
          [access](const RunConfig& c) { return std::string(access(c) ? "true" : "false"); },
          [access, key](RunConfig& c, const std::string& v) { access(c) = parse_flag(key, v); }};
}

template <typename Phase>
void add_schedule(std::vector<Field>& f, const std::string& section, Phase phase) {
  f.push_back(numeric(section, "lr", [phase](auto& c) -> auto& { return phase(c).lr; }));
  f.push_back(
      numeric(section, "momentum", [phase](auto& c) -> auto& { return phase(c).momentum; }));
  f.push_back(numeric(section, "weight_decay",
                      [phase](auto& c) -> auto& { return phase(c).weight_decay; }));
  f.push_back(numeric(section, "epochs", [phase](auto& c) -> auto& { return phase(c).epochs; }));
  f.push_back(
      numeric(section, "decay_every", [phase](auto& c) -> auto& { return phase(c).decay_every; }));
  f.push_back({section, "decay_epochs",
               [phase](const RunConfig& c) { return format_list(phase(c).decay_epochs); },
               [phase](RunConfig& c, const std::string& v) {
                 phase(c).decay_epochs = parse_list("decay_epochs", v);
               }});
  f.push_back(numeric(section, "decay_factor",
                      [phase](auto& c) -> auto& { return phase(c).decay_factor; }));
}

// Model keys that belong in [model]; the rest of ModelConfig is derived
// from the dataset.
constexpr const char* kModelKeys[] = {"graph_branch", "mode",        "kinematics",
                                      "stripes",      "channels",    "embed_dim",
                                      "mlp_hidden",   "gcn_dropout", "stage_blocks"};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto data = [](auto& c) -> auto& { return c.experiment.data; };
    f.push_back(
        numeric("data", "identities", [data](auto& c) -> auto& { return data(c).n_identities; }));
    f.push_back(numeric("data", "tracklets_per_id",
                        [data](auto& c) -> auto& { return data(c).tracklets_per_id; }));
    f.push_back(numeric("data", "frames", [data](auto& c) -> auto& { return data(c).n_frames; }));
    f.push_back(numeric("data", "height", [data](auto& c) -> auto& { return data(c).height; }));
    f.push_back(numeric("data", "width", [data](auto& c) -> auto& { return data(c).width; }));
    f.push_back(
        flag("data", "include_head", [data](auto& c) -> auto& { return data(c).include_head; }));
    f.push_back(numeric("data", "train_fraction",
                        [data](auto& c) -> auto& { return data(c).train_fraction; }));
    f.push_back(
        numeric("data", "pixel_noise", [data](auto& c) -> auto& { return data(c).pixel_noise; }));
    f.push_back(numeric("data", "clutter_blobs",
                        [data](auto& c) -> auto& { return data(c).clutter_blobs; }));
    f.push_back(numeric("data", "occluder_prob",
                        [data](auto& c) -> auto& { return data(c).occluder_prob; }));
    f.push_back({"data", "path",
                 [](const RunConfig& c) { return c.data_path.empty() ? "none" : c.data_path; },
                 [](RunConfig& c, const std::string& v) { c.data_path = v == "none" ? "" : v; }});

    for (const char* key : kModelKeys) {
      const std::string k = key;
      f.push_back({"model", k,
                   [k](const RunConfig& c) {
                     for (const auto& [name, value] : config_entries(c.experiment.model)) {
                       if (name == k) return value;
                     }
                     return std::string();
                   },
                   [k](RunConfig& c, const std::string& v) {
                     apply_config_entry(c.experiment.model, k, v);
                   }});
    }

    add_schedule(f, "phase1", [](auto& c) -> auto& { return c.experiment.recipe.phase1; });
    add_schedule(f, "phase2", [](auto& c) -> auto& { return c.experiment.recipe.phase2; });
    f.push_back(numeric("train", "batch_size",
                        [](auto& c) -> auto& { return c.experiment.recipe.batch_size; }));
    f.push_back(numeric("train", "graph_lr_scale",
                        [](auto& c) -> auto& { return c.experiment.recipe.graph_lr_scale; }));
    f.push_back(numeric("seeds", "data", [](auto& c) -> auto& { return c.experiment.seeds.data; }));
    f.push_back(numeric("seeds", "init", [](auto& c) -> auto& { return c.experiment.seeds.init; }));
    f.push_back(
        numeric("seeds", "train", [](auto& c) -> auto& { return c.experiment.seeds.train; }));
    f.push_back(flag("eval", "cross_camera",
                     [](auto& c) -> auto& { return c.experiment.ranking.cross_camera; }));
    f.push_back(
        numeric("ablation", "repeats", [](auto& c) -> auto& { return c.ablation_repeats; }));
    return f;
  }();
  return table;
}

}  // namespace

RunConfig default_run_config() {
  RunConfig c;
  c.experiment.recipe = default_recipe();
  return c;
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig config = default_run_config();
  std::istringstream in{std::string(text)};
  std::string raw, section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto comment = raw.find_first_of("#;");
    const std::string line = trim(std::string_view(raw).substr(0, comment));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      bool known = false;
      for (const auto& f : fields()) known = known || f.section == section;
      if (!known) throw ParseError(line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
    if (section.empty()) throw ParseError(line_no, "key outside of any [section]");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (f.section == section && f.key == key) field = &f;
    }
    if (!field) throw ParseError(line_no, "unknown key '" + key + "' in [" + section + "]");
    try {
      field->set(config, value);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(
        e.line(),
        path.string() + ": " + std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
  }
}

std::string format_run_config(const RunConfig& config) {
  std::string out, section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      out += (out.empty() ? "[" : "\n[") + f.section + "]\n";
      section = f.section;
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

void write_resolved_config(const RunConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "resolved_config.ini");
  out << format_run_config(config);
  if (!out) throw IoError("cannot write " + (dir / "resolved_config.ini").string());
}

}  // namespace kmp::app
