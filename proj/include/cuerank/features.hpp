#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cuerank/error.hpp"

namespace cuerank {

struct CueKind {
    std::string name;
    std::size_t declared_dim = 0;
};

// Named cue kinds with fixed dimensions. The standard entries cover the
// fc7 and label-logit cues; synthetic or experimental cues register their
// own kinds on top.
class CueRegistry {
public:
    static CueRegistry with_standard_kinds();

    void register_kind(const std::string& name, std::size_t dim);
    const CueKind* find(std::string_view name) const;
    const CueKind& require(std::string_view name) const;
    const std::vector<CueKind>& kinds() const { return kinds_; }

private:
    std::vector<CueKind> kinds_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class RegionTag : std::uint8_t { whole_image = 0, gt_box = 1, detection = 2 };

struct RegionId {
    RegionTag tag = RegionTag::whole_image;
    std::uint32_t index = 0; // meaningful only for detections

    static RegionId whole_image() { return {RegionTag::whole_image, 0}; }
    static RegionId gt_box() { return {RegionTag::gt_box, 0}; }
    static RegionId detection(std::uint32_t i) { return {RegionTag::detection, i}; }

    bool operator==(const RegionId&) const = default;
};

std::string region_to_string(const RegionId& region);
RegionId region_from_string(std::string_view text);

// One dense vector tagged with image, region, and cue kind. Vectors are
// stored as float32, matching the on-disk format.
struct FeatureRecord {
    std::string image_id;
    RegionId region;
    std::string cue;
    std::vector<float> vector;
};

// In-memory index keyed by (image_id, region, cue), insertion-ordered.
// Built single-threaded at load time, immutable afterwards.
class FeatureStore {
public:
    void insert(FeatureRecord record, const CueKind& cue);
    const FeatureRecord* find(std::string_view image_id, const RegionId& region,
                              std::string_view cue) const;
    const std::vector<FeatureRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    // Binary "FVEC" files, or CSV with the same fields; sniffed by magic.
    void load_file(const std::string& path, const CueKind& cue);

private:
    std::vector<FeatureRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Binary feature file: magic "FVEC", little-endian u32 record_count and dim,
// then per record: u32 image_id byte length + bytes, region tag byte
// (0 whole_image, 1 gt_box, 2 detection) with a u32 index when tag = 2,
// then dim float32 values.
void write_feature_file(const std::string& path, std::span<const FeatureRecord> records,
                        std::size_t dim);

// CSV: image_id,region,v1,...,vD with region one of whole_image, gt_box,
// detection:N.
void write_feature_csv(const std::string& path, std::span<const FeatureRecord> records,
                       std::size_t dim);

// Concatenates part vectors in the given order; all parts must share an
// image id.
std::vector<double> stack_features(std::span<const FeatureRecord* const> parts);

// Elementwise mean over records of one cue and image.
std::vector<double> pool_regions(std::span<const FeatureRecord* const> records);

} // namespace cuerank
