#include "canforge/vocabulary.hpp"

#include <stdexcept>

namespace canforge {

StyleVocabulary::StyleVocabulary()
    : names_{
          "Abstract_Expressionism",
          "Action_painting",
          "Analytical_Cubism",
          "Art_Nouveau",
          "Baroque",
          "Color_Field_Painting",
          "Contemporary_Realism",
          "Cubism",
          "Early_Renaissance",
          "Expressionism",
          "Fauvism",
          "High_Renaissance",
          "Impressionism",
          "Mannerism_Late_Renaissance",
          "Minimalism",
          "Naive_Art_Primitivism",
          "New_Realism",
          "Northern_Renaissance",
          "Pointillism",
          "Pop_Art",
          "Post_Impressionism",
          "Realism",
          "Rococo",
          "Romanticism",
      } {}

const StyleVocabulary& StyleVocabulary::instance() {
  static const StyleVocabulary vocab;
  return vocab;
}

std::optional<int> StyleVocabulary::find(const std::string& name) const {
  for (size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  return std::nullopt;
}

int StyleVocabulary::index_of(const std::string& name) const {
  if (auto idx = find(name)) return *idx;
  std::string known;
  for (const auto& n : names_) known += "\n  " + n;
  throw std::out_of_range("unknown style '" + name + "'; known styles:" + known);
}

const std::string& StyleVocabulary::name_of(int index) const {
  if (index < 0 || index >= size())
    throw std::out_of_range("style index " + std::to_string(index) + " out of range [0," +
                            std::to_string(size()) + ")");
  return names_[static_cast<size_t>(index)];
}

}  // namespace canforge
