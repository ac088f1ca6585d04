#include "cuerank/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace cuerank {

CueRegistry CueRegistry::with_standard_kinds() {
    CueRegistry reg;
    reg.register_kind("vgg_fc7", 4096);
    reg.register_kind("places_fc7", 4096);
    reg.register_kind("act_hico_fc7", 4096);
    reg.register_kind("act_mpii_fc7", 4096);
    reg.register_kind("attr_fc7", 4096);
    reg.register_kind("color_fc7", 4096);
    reg.register_kind("act_hico_labels", 600);
    reg.register_kind("act_mpii_labels", 393);
    reg.register_kind("attr_labels", 302);
    reg.register_kind("color_labels", 11);
    return reg;
}

void CueRegistry::register_kind(const std::string& name, std::size_t dim) {
    if (name.empty() || dim == 0)
        raise(ErrorCode::invalid_argument, "cue kind needs a name and a positive dimension");
    auto it = index_.find(name);
    if (it != index_.end()) {
        if (kinds_[it->second].declared_dim != dim)
            raise(ErrorCode::config, "cue kind '" + name + "' re-registered with dimension " +
                                         std::to_string(dim) + " (was " +
                                         std::to_string(kinds_[it->second].declared_dim) + ")");
        return;
    }
    index_.emplace(name, kinds_.size());
    kinds_.push_back(CueKind{name, dim});
}

const CueKind* CueRegistry::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &kinds_[it->second];
}

const CueKind& CueRegistry::require(std::string_view name) const {
    const CueKind* kind = find(name);
    if (!kind) raise(ErrorCode::config, "unknown cue kind: " + std::string(name));
    return *kind;
}

std::string region_to_string(const RegionId& region) {
    switch (region.tag) {
        case RegionTag::whole_image: return "whole_image";
        case RegionTag::gt_box: return "gt_box";
        case RegionTag::detection: return "detection:" + std::to_string(region.index);
    }
    return "?";
}

RegionId region_from_string(std::string_view text) {
    if (text == "whole_image") return RegionId::whole_image();
    if (text == "gt_box") return RegionId::gt_box();
    if (text.starts_with("detection:")) {
        std::string_view num = text.substr(10);
        std::uint32_t idx = 0;
        auto res = std::from_chars(num.data(), num.data() + num.size(), idx);
        if (res.ec == std::errc{} && res.ptr == num.data() + num.size())
            return RegionId::detection(idx);
    }
    raise(ErrorCode::parse, "bad region reference: " + std::string(text));
}

namespace {

std::string store_key(std::string_view image_id, const RegionId& region, std::string_view cue) {
    std::string key;
    key.reserve(image_id.size() + cue.size() + 16);
    key.append(image_id);
    key.push_back('\x1f');
    key.append(cue);
    key.push_back('\x1f');
    key.push_back(static_cast<char>('0' + static_cast<int>(region.tag)));
    if (region.tag == RegionTag::detection) {
        key.push_back(':');
        key.append(std::to_string(region.index));
    }
    return key;
}

void check_finite(const FeatureRecord& rec) {
    for (float v : rec.vector)
        if (!std::isfinite(v))
            raise(ErrorCode::invalid_argument,
                  "non-finite feature value for image '" + rec.image_id + "', region " +
                      region_to_string(rec.region) + ", cue " + rec.cue);
}

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is, const std::string& path) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) raise(ErrorCode::io, "truncated feature file: " + path);
    return v;
}

} // namespace

void FeatureStore::insert(FeatureRecord record, const CueKind& cue) {
    if (record.cue != cue.name)
        raise(ErrorCode::invalid_argument, "record cue '" + record.cue +
                                               "' does not match kind '" + cue.name + "'");
    if (record.vector.size() != cue.declared_dim)
        raise(ErrorCode::dimension_mismatch,
              "feature for image '" + record.image_id + "' has " +
                  std::to_string(record.vector.size()) + " values, cue " + cue.name +
                  " declares " + std::to_string(cue.declared_dim));
    check_finite(record);
    std::string key = store_key(record.image_id, record.region, record.cue);
    auto [it, inserted] = index_.emplace(std::move(key), records_.size());
    (void)it;
    if (!inserted)
        raise(ErrorCode::invalid_argument,
              "duplicate feature key: image '" + record.image_id + "', region " +
                  region_to_string(record.region) + ", cue " + record.cue);
    records_.push_back(std::move(record));
}

const FeatureRecord* FeatureStore::find(std::string_view image_id, const RegionId& region,
                                        std::string_view cue) const {
    auto it = index_.find(store_key(image_id, region, cue));
    return it == index_.end() ? nullptr : &records_[it->second];
}

void FeatureStore::load_file(const std::string& path, const CueKind& cue) {
    std::ifstream is(path, std::ios::binary);
    if (!is) raise(ErrorCode::io, "cannot open feature file: " + path);

    char magic[4] = {};
    is.read(magic, 4);
    if (is && std::memcmp(magic, "FVEC", 4) == 0) {
        const std::uint32_t count = read_u32(is, path);
        const std::uint32_t dim = read_u32(is, path);
        if (dim != cue.declared_dim)
            raise(ErrorCode::dimension_mismatch,
                  path + ": header dimension " + std::to_string(dim) + " does not match cue " +
                      cue.name + " (" + std::to_string(cue.declared_dim) + ")");
        for (std::uint32_t r = 0; r < count; ++r) {
            FeatureRecord rec;
            const std::uint32_t id_len = read_u32(is, path);
            rec.image_id.resize(id_len);
            is.read(rec.image_id.data(), id_len);
            std::uint8_t tag = 0;
            is.read(reinterpret_cast<char*>(&tag), 1);
            if (!is) raise(ErrorCode::io, "truncated feature file: " + path);
            if (tag > 2) raise(ErrorCode::parse, path + ": bad region tag");
            rec.region.tag = static_cast<RegionTag>(tag);
            if (rec.region.tag == RegionTag::detection) rec.region.index = read_u32(is, path);
            rec.cue = cue.name;
            rec.vector.resize(dim);
            is.read(reinterpret_cast<char*>(rec.vector.data()),
                    static_cast<std::streamsize>(dim * sizeof(float)));
            if (!is) raise(ErrorCode::io, "truncated feature file: " + path);
            insert(std::move(rec), cue);
        }
        return;
    }

    // CSV fallback: image_id,region,v1,...,vD
    is.close();
    std::ifstream text(path);
    if (!text) raise(ErrorCode::io, "cannot open feature file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(text, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view view(line);
        std::size_t start = 0;
        while (true) {
            std::size_t comma = view.find(',', start);
            fields.push_back(view.substr(start, comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != cue.declared_dim + 2)
            raise(ErrorCode::parse, path + ":" + std::to_string(line_no) + ": expected " +
                                        std::to_string(cue.declared_dim + 2) + " fields, got " +
                                        std::to_string(fields.size()));
        FeatureRecord rec;
        rec.image_id = std::string(fields[0]);
        rec.region = region_from_string(fields[1]);
        rec.cue = cue.name;
        rec.vector.resize(cue.declared_dim);
        for (std::size_t j = 0; j < cue.declared_dim; ++j) {
            float v = 0.0f;
            std::string_view f = fields[j + 2];
            auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc{} || res.ptr != f.data() + f.size())
                raise(ErrorCode::parse,
                      path + ":" + std::to_string(line_no) + ": non-numeric value");
            rec.vector[j] = v;
        }
        insert(std::move(rec), cue);
    }
}

void write_feature_file(const std::string& path, std::span<const FeatureRecord> records,
                        std::size_t dim) {
    std::ofstream os(path, std::ios::binary);
    if (!os) raise(ErrorCode::io, "cannot open feature file for writing: " + path);
    os.write("FVEC", 4);
    write_u32(os, static_cast<std::uint32_t>(records.size()));
    write_u32(os, static_cast<std::uint32_t>(dim));
    for (const FeatureRecord& rec : records) {
        if (rec.vector.size() != dim)
            raise(ErrorCode::dimension_mismatch, "record dimension mismatch writing " + path);
        write_u32(os, static_cast<std::uint32_t>(rec.image_id.size()));
        os.write(rec.image_id.data(), static_cast<std::streamsize>(rec.image_id.size()));
        const std::uint8_t tag = static_cast<std::uint8_t>(rec.region.tag);
        os.write(reinterpret_cast<const char*>(&tag), 1);
        if (rec.region.tag == RegionTag::detection) write_u32(os, rec.region.index);
        os.write(reinterpret_cast<const char*>(rec.vector.data()),
                 static_cast<std::streamsize>(dim * sizeof(float)));
    }
    if (!os) raise(ErrorCode::io, "failed writing feature file: " + path);
}

void write_feature_csv(const std::string& path, std::span<const FeatureRecord> records,
                       std::size_t dim) {
    std::ofstream os(path);
    if (!os) raise(ErrorCode::io, "cannot open feature file for writing: " + path);
    char buf[64];
    for (const FeatureRecord& rec : records) {
        if (rec.vector.size() != dim)
            raise(ErrorCode::dimension_mismatch, "record dimension mismatch writing " + path);
        os << rec.image_id << ',' << region_to_string(rec.region);
        for (float v : rec.vector) {
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
            os << ',' << buf;
        }
        os << '\n';
    }
    if (!os) raise(ErrorCode::io, "failed writing feature file: " + path);
}

std::vector<double> stack_features(std::span<const FeatureRecord* const> parts) {
    if (parts.empty())
        raise(ErrorCode::invalid_argument, "stack_features: empty part sequence");
    std::size_t total = 0;
    for (const FeatureRecord* part : parts) {
        if (!part) raise(ErrorCode::invalid_argument, "stack_features: null part");
        if (part->image_id != parts[0]->image_id)
            raise(ErrorCode::invalid_argument, "stack_features: parts from different images ('" +
                                                   parts[0]->image_id + "' vs '" +
                                                   part->image_id + "')");
        total += part->vector.size();
    }
    std::vector<double> out;
    out.reserve(total);
    for (const FeatureRecord* part : parts)
        out.insert(out.end(), part->vector.begin(), part->vector.end());
    return out;
}

std::vector<double> pool_regions(std::span<const FeatureRecord* const> records) {
    if (records.empty())
        raise(ErrorCode::invalid_argument, "pool_regions: empty input");
    const FeatureRecord* first = records[0];
    if (!first) raise(ErrorCode::invalid_argument, "pool_regions: null record");
    std::vector<double> out(first->vector.size(), 0.0);
    for (const FeatureRecord* rec : records) {
        if (!rec) raise(ErrorCode::invalid_argument, "pool_regions: null record");
        if (rec->cue != first->cue)
            raise(ErrorCode::invalid_argument, "pool_regions: mixed cues ('" + first->cue +
                                                   "' vs '" + rec->cue + "')");
        if (rec->image_id != first->image_id)
            raise(ErrorCode::invalid_argument, "pool_regions: mixed images");
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += rec->vector[j];
    }
    const double inv = 1.0 / static_cast<double>(records.size());
    for (double& v : out) v *= inv;
    return out;
}

} // namespace cuerank
