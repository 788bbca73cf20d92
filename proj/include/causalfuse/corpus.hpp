#pragma once

// On-disk corpus layout:
//   <root>/<split>/<category>/<id>_ir.pgm, <id>_vis.pgm
//   <root>/manifest.csv  (id,category,split)

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "causalfuse/confounder.hpp"
#include "causalfuse/error.hpp"
#include "causalfuse/image.hpp"
#include "causalfuse/scenegen.hpp"

namespace causalfuse {

struct ManifestRow {
  std::string id;
  std::string category;
  std::string split;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

inline std::vector<ManifestRow> read_manifest(const std::filesystem::path& root) {
  const auto path = root / "manifest.csv";
  std::vector<ManifestRow> rows;
  if (!std::filesystem::exists(path)) return rows;
  std::istringstream in(read_file(path));
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      if (line != "id,category,split") throw FormatError("manifest " + path.string() + " has an unexpected header");
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.rfind(',');
    if (a == std::string::npos || a == b) throw FormatError("manifest row '" + line + "' is malformed");
    rows.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1), line.substr(b + 1)});
  }
  return rows;
}

inline std::string manifest_csv(std::vector<ManifestRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const ManifestRow& x, const ManifestRow& y) { return std::tie(x.split, x.id) < std::tie(y.split, y.id); });
  std::string out = "id,category,split\n";
  for (const auto& r : rows) out += r.id + "," + r.category + "," + r.split + "\n";
  return out;
}

/// Writes one split into a staging directory, then swaps it into place and
/// rewrites the manifest. Rows of other splits are kept.
inline void write_corpus(const std::filesystem::path& root, const std::string& split, std::span<const ImagePair> pairs) {
  namespace fs = std::filesystem;
  if (split.empty() || split.find_first_of("/\\,") != std::string::npos)
    throw ContractError("invalid split name '" + split + "'");
  fs::create_directories(root);
  const fs::path staging = root / ("." + split + ".staging");
  fs::remove_all(staging);
  std::vector<ManifestRow> rows;
  for (const auto& p : read_manifest(root))
    if (p.split != split) rows.push_back(p);
  for (const auto& pair : pairs) {
    const std::string cat(to_string(pair.category));
    const fs::path dir = staging / cat;
    fs::create_directories(dir);
    write_file_atomic(dir / (pair.id + "_ir.pgm"), encode_pgm(pair.ir));
    write_file_atomic(dir / (pair.id + "_vis.pgm"), encode_pgm(pair.vis));
    rows.push_back({pair.id, cat, split});
  }
  fs::create_directories(staging);
  const fs::path target = root / split;
  fs::remove_all(target);
  fs::rename(staging, target);
  write_file_atomic(root / "manifest.csv", manifest_csv(std::move(rows)));
}

inline std::filesystem::path pair_path(const std::filesystem::path& root, const ManifestRow& row, Modality m) {
  return root / row.split / row.category / (row.id + (m == Modality::infrared ? "_ir.pgm" : "_vis.pgm"));
}

/// Pairs of one split in manifest order.
inline std::vector<ImagePair> read_corpus(const std::filesystem::path& root, const std::string& split) {
  std::vector<ImagePair> out;
  for (const auto& row : read_manifest(root)) {
    if (row.split != split) continue;
    const auto cat = parse_category(row.category);
    if (!cat) throw FormatError("manifest lists unknown category '" + row.category + "'");
    out.push_back({read_pgm(pair_path(root, row, Modality::infrared)), read_pgm(pair_path(root, row, Modality::visible)),
                   *cat, row.id});
  }
  return out;
}

/// Images of one modality only; the other modality's files are never opened.
inline std::vector<Image> read_modality_images(const std::filesystem::path& root, const std::string& split, Modality m) {
  std::vector<Image> out;
  for (const auto& row : read_manifest(root))
    if (row.split == split) out.push_back(read_pgm(pair_path(root, row, m)));
  return out;
}

}  // namespace causalfuse
