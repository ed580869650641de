#pragma once

#include <optional>
#include <string>
#include <vector>

namespace canforge {

/// The fixed, ordered set of 24 WikiArt style tags. Index order is the
/// canonical listing order and is stable across the toolkit (labels, CSV,
/// checkpoints).
class StyleVocabulary {
 public:
  static const StyleVocabulary& instance();

  const std::vector<std::string>& names() const { return names_; }
  int size() const { return static_cast<int>(names_.size()); }

  /// Index in [0, 24); throws std::out_of_range for unknown names, listing
  /// the vocabulary in the message.
  int index_of(const std::string& name) const;
  std::optional<int> find(const std::string& name) const;
  const std::string& name_of(int index) const;

 private:
  StyleVocabulary();
  std::vector<std::string> names_;
};

}  // namespace canforge
