#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace canforge {

struct ManifestEntry {
  std::filesystem::path file;
  int style = 0;  // StyleVocabulary index
};

/// Immutable listing of a labeled image corpus. Entries are ordered
/// lexicographically by path; counts are per-style totals.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::map<std::string, int64_t> counts;
  int64_t skipped = 0;
};

/// Scan a `<root>/<StyleName>/<images>` corpus. Every subdirectory must be a
/// known style (hard error otherwise). Files that fail to decode, or decode
/// below the 72x72 minimum, are skipped with a warning on stderr and counted
/// in `skipped`. Throws if no usable entries remain.
DatasetManifest load_manifest(const std::filesystem::path& root_dir);

/// Load from a `path,style` CSV (UTF-8, header required). Relative paths
/// resolve against the CSV's directory. Same decode/skip policy as
/// load_manifest; entries are sorted lexicographically by path.
DatasetManifest load_manifest_csv(const std::filesystem::path& csv_file);

}  // namespace canforge
