#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "kmp/error.hpp"
#include "kmp/model/dataset.hpp"

namespace kmp {

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian");

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kQuery:
      return "query";
    case Split::kGallery:
      return "gallery";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "query") return Split::kQuery;
  if (text == "gallery") return Split::kGallery;
  throw ConfigError("unknown split '" + std::string(text) + "'");
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tracklets.size(); ++i) {
    if (tracklets[i].split == split) out.push_back(i);
  }
  return out;
}

Tensor Dataset::frames_tensor(std::size_t index) const {
  const Tracklet& tr = tracklets.at(index);
  std::vector<double> data(tr.frames.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = (tr.frames[i] - 0.5) / 0.25;
  return Tensor(Shape{n_frames, 3, height, width}, std::move(data));
}

namespace {

constexpr const char* kMagic = "kmp-dataset 1";

std::size_t visibility_bytes(const Dataset& ds) { return (ds.n_frames * ds.n_joints + 7) / 8; }

template <typename T>
void write_raw(std::ofstream& out, const T* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

template <typename T>
void read_raw(std::ifstream& in, T* data, std::size_t count, const std::filesystem::path& path) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(T)) {
    throw IntegrityError("truncated file " + path.string());
  }
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto manifest = open_out(dir / "manifest.txt", false);
  manifest << kMagic << "\n"
           << "seed " << ds.seed << "\n"
           << "identities " << ds.n_identities << "\n"
           << "tracklets_per_id " << ds.tracklets_per_id << "\n"
           << "train_identities " << ds.n_train_identities << "\n"
           << "frames " << ds.n_frames << "\n"
           << "height " << ds.height << "\n"
           << "width " << ds.width << "\n"
           << "joints " << ds.n_joints << "\n"
           << "include_head " << (ds.include_head ? 1 : 0) << "\n"
           << "tracklets " << ds.tracklets.size() << "\n";
  for (std::size_t i = 0; i < ds.tracklets.size(); ++i) {
    const Tracklet& tr = ds.tracklets[i];
    manifest << "tracklet " << i << " " << tr.identity << " " << tr.camera << " "
             << to_string(tr.split) << "\n";
  }
  if (!manifest) throw IoError("failed writing manifest in " + dir.string());

  auto frames = open_out(dir / "frames.f32", true);
  auto keypoints = open_out(dir / "keypoints.f32", true);
  auto visibility = open_out(dir / "visibility.bits", true);
  const std::size_t frame_count = ds.n_frames * 3 * ds.height * ds.width;
  for (const Tracklet& tr : ds.tracklets) {
    if (tr.frames.size() != frame_count || tr.track.n_frames != ds.n_frames ||
        tr.track.n_joints != ds.n_joints) {
      throw DimensionError("save_dataset: tracklet shape disagrees with dataset header");
    }
    write_raw(frames, tr.frames.data(), tr.frames.size());
    std::vector<float> kp(tr.track.coords.begin(), tr.track.coords.end());
    write_raw(keypoints, kp.data(), kp.size());
    std::vector<std::uint8_t> bits(visibility_bytes(ds), 0);
    for (std::size_t b = 0; b < tr.track.visible.size(); ++b) {
      if (tr.track.visible[b]) bits[b / 8] |= static_cast<std::uint8_t>(1u << (b % 8));
    }
    write_raw(visibility, bits.data(), bits.size());
  }
  if (!frames || !keypoints || !visibility) throw IoError("failed writing " + dir.string());
}

Dataset load_dataset(const std::filesystem::path& dir) {
  auto manifest = open_in(dir / "manifest.txt", false);
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_tracklets = 0;
  int include_head = 0;
  if (!std::getline(manifest, line) || line != kMagic) {
    throw ParseError(1, "expected '" + std::string(kMagic) + "' in " + dir.string());
  }
  ++line_no;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    bool ok = true;
    if (key == "seed")
      ok = bool(ss >> ds.seed);
    else if (key == "identities")
      ok = bool(ss >> ds.n_identities);
    else if (key == "tracklets_per_id")
      ok = bool(ss >> ds.tracklets_per_id);
    else if (key == "train_identities")
      ok = bool(ss >> ds.n_train_identities);
    else if (key == "frames")
      ok = bool(ss >> ds.n_frames);
    else if (key == "height")
      ok = bool(ss >> ds.height);
    else if (key == "width")
      ok = bool(ss >> ds.width);
    else if (key == "joints")
      ok = bool(ss >> ds.n_joints);
    else if (key == "include_head")
      ok = bool(ss >> include_head);
    else if (key == "tracklets")
      ok = bool(ss >> expected_tracklets);
    else if (key == "tracklet") {
      std::size_t idx = 0;
      std::string split;
      Tracklet tr;
      ok = bool(ss >> idx >> tr.identity >> tr.camera >> split);
      if (ok && idx != ds.tracklets.size()) throw ParseError(line_no, "tracklet rows out of order");
      if (ok) {
        try {
          tr.split = parse_split(split);
        } catch (const ConfigError& e) {
          throw ParseError(line_no, e.what());
        }
        ds.tracklets.push_back(std::move(tr));
      }
    } else {
      throw ParseError(line_no, "unknown manifest key '" + key + "'");
    }
    if (!ok) throw ParseError(line_no, "malformed manifest entry '" + line + "'");
  }
  ds.include_head = include_head != 0;
  if (ds.tracklets.size() != expected_tracklets) {
    throw IntegrityError("manifest lists " + std::to_string(ds.tracklets.size()) +
                         " tracklets but declares " + std::to_string(expected_tracklets));
  }

  auto frames = open_in(dir / "frames.f32", true);
  auto keypoints = open_in(dir / "keypoints.f32", true);
  auto visibility = open_in(dir / "visibility.bits", true);
  const std::size_t frame_count = ds.n_frames * 3 * ds.height * ds.width;
  for (Tracklet& tr : ds.tracklets) {
    if (tr.identity >= ds.n_identities) {
      throw IntegrityError("tracklet identity " + std::to_string(tr.identity) + " out of range");
    }
    tr.frames.resize(frame_count);
    read_raw(frames, tr.frames.data(), frame_count, dir / "frames.f32");
    tr.track = KeypointTrack(ds.n_frames, ds.n_joints);
    std::vector<float> kp(tr.track.coords.size());
    read_raw(keypoints, kp.data(), kp.size(), dir / "keypoints.f32");
    tr.track.coords.assign(kp.begin(), kp.end());
    std::vector<std::uint8_t> bits(visibility_bytes(ds));
    read_raw(visibility, bits.data(), bits.size(), dir / "visibility.bits");
    for (std::size_t b = 0; b < tr.track.visible.size(); ++b) {
      tr.track.visible[b] = (bits[b / 8] >> (b % 8)) & 1u;
    }
    tr.track.validate();
  }
  if (frames.peek() != std::char_traits<char>::eof()) {
    throw IntegrityError("frames.f32 has trailing data");
  }
  return ds;
}

}  // namespace kmp
