#pragma once

// On-disk dataset layout:
//   <root>/sequences/<id>/frame_0000.png ...   8- or 16-bit PNG, linear RGB
//   <root>/groundtruth.json                     {"<id>": [r, g, b], ...}
//   <root>/splits/<name>.json                   {"train": [...], "test": [...]}

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcc/data.hpp"
#include "tcc/log.hpp"

namespace tcc {

namespace fs = std::filesystem;

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- PNG -----------------------------------------------------------------

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_throw(png_structp, png_const_charp msg) { throw LoadError(msg); }
inline void png_warn(png_structp, png_const_charp) {}
}  // namespace detail

// Values are scaled to [0, 1] without any transfer-curve conversion.
inline ImageFrame read_png(const fs::path& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw LoadError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_throw, detail::png_warn);
  png_infop info = png_create_info_struct(png);
  struct Cleanup {
    png_structp* p;
    png_infop* i;
    ~Cleanup() { png_destroy_read_struct(p, i, nullptr); }
  } cleanup{&png, &info};

  try {
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);

    const int W = static_cast<int>(png_get_image_width(png, info));
    const int H = static_cast<int>(png_get_image_height(png, info));
    const int out_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<unsigned char> buf(rowbytes * H);
    std::vector<png_bytep> rows(H);
    for (int y = 0; y < H; ++y) rows[y] = buf.data() + y * rowbytes;
    png_read_image(png, rows.data());

    ImageFrame f(H, W);
    auto d = f.data();
    const std::size_t n = static_cast<std::size_t>(W) * H * 3;
    if (out_depth == 16) {
      for (std::size_t i = 0; i < n; ++i) {
        std::uint16_t v = static_cast<std::uint16_t>(buf[2 * i] | (buf[2 * i + 1] << 8));
        d[i] = v / 65535.0;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) d[i] = buf[i] / 255.0;
    }
    return f;
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

// 16-bit RGB; values are clipped to [0, 1] for storage only.
inline void write_png(const fs::path& path, const ImageFrame& f) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_throw, detail::png_warn);
  png_infop info = png_create_info_struct(png);
  struct Cleanup {
    png_structp* p;
    png_infop* i;
    ~Cleanup() { png_destroy_write_struct(p, i); }
  } cleanup{&png, &info};

  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, f.width(), f.height(), 16, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(static_cast<std::size_t>(f.width()) * 6);
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        const auto v = static_cast<std::uint16_t>(std::lround(std::clamp(f.at(y, x, c), 0.0, 1.0) * 65535.0));
        row[(x * 3 + c) * 2] = static_cast<unsigned char>(v >> 8);
        row[(x * 3 + c) * 2 + 1] = static_cast<unsigned char>(v & 0xff);
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

// ---- dataset -------------------------------------------------------------

inline std::string frame_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu.png", index);
  return buf;
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Sequences sorted by id; frames ordered by filename.
inline std::vector<FrameSequence> load_dataset(const fs::path& root) {
  std::vector<FrameSequence> out;
  const fs::path seq_dir = root / "sequences";
  if (!fs::exists(seq_dir)) {
    log_warning("dataset root " + root.string() + " has no sequences");
    return out;
  }
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(seq_dir))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) {
    log_warning("dataset root " + root.string() + " has no sequences");
    return out;
  }

  const fs::path gt_path = root / "groundtruth.json";
  const nlohmann::json gt = fs::exists(gt_path) ? read_json(gt_path) : nlohmann::json::object();

  for (const auto& dir : dirs) {
    FrameSequence seq;
    seq.id = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw LoadError("sequence '" + seq.id + "' has no frames");
    for (const auto& f : files) {
      seq.frames.push_back(read_png(f));
      if (seq.frames.back().height() != seq.frames.front().height() ||
          seq.frames.back().width() != seq.frames.front().width())
        throw LoadError("sequence '" + seq.id + "': frame size mismatch in " + f.filename().string());
    }
    if (!gt.contains(seq.id)) throw LoadError("missing ground truth for sequence '" + seq.id + "'");
    const auto& v = gt.at(seq.id);
    if (!v.is_array() || v.size() != 3)
      throw LoadError("malformed ground truth for sequence '" + seq.id + "'");
    try {
      seq.ground_truth = Illuminant::normalized(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
    } catch (const std::exception& e) {
      throw LoadError("invalid ground truth for sequence '" + seq.id + "': " + e.what());
    }
    out.push_back(std::move(seq));
  }
  return out;
}

inline void write_dataset(const fs::path& root, const std::vector<FrameSequence>& sequences) {
  fs::create_directories(root / "sequences");
  nlohmann::json gt = nlohmann::json::object();
  for (const auto& seq : sequences) {
    const fs::path dir = root / "sequences" / seq.id;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) write_png(dir / frame_filename(i), seq.frames[i]);
    if (seq.ground_truth) {
      const auto& c = *seq.ground_truth;
      gt[seq.id] = {c.r(), c.g(), c.b()};
    }
  }
  write_json(root / "groundtruth.json", gt);
}

inline DatasetSplit read_split(const fs::path& root, const std::string& name) {
  const nlohmann::json j = read_json(root / "splits" / (name + ".json"));
  DatasetSplit s;
  s.name = name;
  try {
    s.train_ids = j.at("train").get<std::vector<std::string>>();
    s.test_ids = j.at("test").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("split '" + name + "': " + e.what());
  }
  return s;
}

inline void write_split(const fs::path& root, const DatasetSplit& s) {
  fs::create_directories(root / "splits");
  write_json(root / "splits" / (s.name + ".json"), {{"train", s.train_ids}, {"test", s.test_ids}});
}

inline std::vector<FrameSequence> subset(const std::vector<FrameSequence>& all,
                                         const std::vector<std::string>& ids) {
  std::vector<FrameSequence> out;
  for (const auto& id : ids) {
    auto it = std::find_if(all.begin(), all.end(), [&](const FrameSequence& s) { return s.id == id; });
    if (it == all.end()) throw LoadError("split references unknown sequence '" + id + "'");
    out.push_back(*it);
  }
  return out;
}

}  // namespace tcc
