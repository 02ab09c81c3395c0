#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace protrag {

/// Topic label of one annotation block, stored in canonical form:
/// trimmed, uppercase, internal whitespace collapsed to one space.
class AttributeTag {
public:
    /// Normalizes `name`; throws std::invalid_argument if nothing remains.
    explicit AttributeTag(std::string_view name);

    static std::string normalize(std::string_view name);

    const std::string& name() const noexcept { return name_; }

    friend bool operator==(const AttributeTag&, const AttributeTag&) = default;
    friend auto operator<=>(const AttributeTag&, const AttributeTag&) = default;

private:
    std::string name_;
};

namespace tags {
inline constexpr std::string_view kFunction = "FUNCTION";
inline constexpr std::string_view kCatalyticActivity = "CATALYTIC ACTIVITY";
inline constexpr std::string_view kSubcellularLocation = "SUBCELLULAR LOCATION";
inline constexpr std::string_view kPathway = "PATHWAY";
inline constexpr std::string_view kSubunit = "SUBUNIT";
inline constexpr std::string_view kPtm = "PTM";
inline constexpr std::string_view kSimilarity = "SIMILARITY";
inline constexpr std::string_view kGoMolecularFunction = "GO:MOLECULAR_FUNCTION";
inline constexpr std::string_view kGoBiologicalProcess = "GO:BIOLOGICAL_PROCESS";
inline constexpr std::string_view kGoCellularComponent = "GO:CELLULAR_COMPONENT";
inline constexpr std::string_view kDomainMotif = "DOMAIN_MOTIF";
}  // namespace tags

}  // namespace protrag
