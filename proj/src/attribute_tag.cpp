#include "protrag/attribute_tag.hpp"

#include <stdexcept>

#include "protrag/text.hpp"

namespace protrag {

AttributeTag::AttributeTag(std::string_view name) : name_(normalize(name)) {
    if (name_.empty()) throw std::invalid_argument("attribute tag must not be empty");
}

std::string AttributeTag::normalize(std::string_view name) {
    return text::to_upper(text::collapse_whitespace(name));
}

}  // namespace protrag
