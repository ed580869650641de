#include "canforge/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "canforge/image_io.hpp"
#include "canforge/vocabulary.hpp"

namespace canforge {

namespace {

constexpr int kMinSide = 72;  // 0.9 * 72 floors to 64, so crops never degenerate

bool validate_entry(const std::filesystem::path& file, int64_t* skipped) {
  auto img = decode_image(file);
  if (!img) {
    std::fprintf(stderr, "warning: skipping undecodable image %s\n", file.string().c_str());
    ++*skipped;
    return false;
  }
  if (img->height < kMinSide || img->width < kMinSide) {
    std::fprintf(stderr, "warning: skipping %s (%dx%d is below the %dx%d minimum)\n",
                 file.string().c_str(), img->width, img->height, kMinSide, kMinSide);
    ++*skipped;
    return false;
  }
  return true;
}

void finalize(DatasetManifest& m, const std::string& where) {
  std::sort(m.entries.begin(), m.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.file.string() < b.file.string(); });
  if (m.entries.empty()) throw std::runtime_error("no entries in " + where);
  const auto& vocab = StyleVocabulary::instance();
  for (const auto& e : m.entries) ++m.counts[vocab.name_of(e.style)];
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& root_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root_dir))
    throw std::runtime_error("corpus root is not a directory: " + root_dir.string());
  const auto& vocab = StyleVocabulary::instance();

  DatasetManifest m;
  for (const auto& dir : fs::directory_iterator(root_dir)) {
    if (!dir.is_directory()) continue;
    const std::string style_name = dir.path().filename().string();
    const auto style = vocab.find(style_name);
    if (!style)
      throw std::runtime_error("unknown style directory '" + style_name + "' under " +
                               root_dir.string());
    for (const auto& f : fs::directory_iterator(dir.path())) {
      if (!f.is_regular_file()) continue;
      if (validate_entry(f.path(), &m.skipped)) m.entries.push_back({f.path(), *style});
    }
  }
  finalize(m, root_dir.string());
  return m;
}

DatasetManifest load_manifest_csv(const std::filesystem::path& csv_file) {
  std::ifstream in(csv_file);
  if (!in) throw std::runtime_error("cannot open manifest CSV: " + csv_file.string());
  const auto base = csv_file.parent_path();
  const auto& vocab = StyleVocabulary::instance();

  std::string line;
  if (!std::getline(in, line) || line.rfind("path,style", 0) != 0)
    throw std::runtime_error("manifest CSV must start with a 'path,style' header: " +
                             csv_file.string());
  DatasetManifest m;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos)
      throw std::runtime_error(csv_file.string() + ":" + std::to_string(line_no) +
                               ": expected 'path,style'");
    std::string path_str = line.substr(0, comma);
    std::string style_name = line.substr(comma + 1);
    while (!style_name.empty() && (style_name.back() == '\r' || style_name.back() == ' '))
      style_name.pop_back();
    const auto style = vocab.find(style_name);
    if (!style)
      throw std::runtime_error(csv_file.string() + ":" + std::to_string(line_no) +
                               ": unknown style '" + style_name + "'");
    std::filesystem::path p(path_str);
    if (p.is_relative()) p = base / p;
    if (validate_entry(p, &m.skipped)) m.entries.push_back({p, *style});
  }
  finalize(m, csv_file.string());
  return m;
}

}  // namespace canforge
