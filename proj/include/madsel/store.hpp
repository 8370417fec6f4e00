#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "madsel/error.hpp"
#include "madsel/forest.hpp"
#include "madsel/image.hpp"
#include "madsel/infotheory.hpp"
#include "madsel/layout.hpp"
#include "madsel/metrics.hpp"
#include "madsel/protocol.hpp"
#include "madsel/selection.hpp"

namespace madsel {

// Feature store layout:
//   MADSEL-FEATURES 1\n
//   <single-line JSON header: rows, cols, extractor, row_ids, layout>\n
//   rows * cols little-endian float32, row-major

inline constexpr const char* kStoreMagic = "MADSEL-FEATURES 1";

struct FeatureStore {
    std::string extractor;
    std::vector<std::string> row_ids;
    LayoutPtr layout;
    FeatureMatrix matrix;
};

inline std::vector<std::uint8_t> encode_store(const FeatureStore& s) {
    if (!s.layout || s.layout->size() != s.matrix.cols) throw ArgumentError("store layout does not match matrix width");
    if (!s.row_ids.empty() && s.row_ids.size() != s.matrix.rows) throw ArgumentError("row id count mismatch");
    const nlohmann::json header = {{"rows", s.matrix.rows},
                                   {"cols", s.matrix.cols},
                                   {"extractor", s.extractor},
                                   {"row_ids", s.row_ids},
                                   {"layout", to_json(*s.layout)}};
    const std::string text = std::string(kStoreMagic) + "\n" + header.dump() + "\n";
    std::vector<std::uint8_t> out(text.begin(), text.end());
    out.reserve(out.size() + s.matrix.data.size() * 4);
    for (float f : s.matrix.data) {
        auto bits = std::bit_cast<std::uint32_t>(f);
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
    return out;
}

inline FeatureStore decode_store(const std::vector<std::uint8_t>& bytes) {
    auto line_end = [&](std::size_t from) {
        for (std::size_t i = from; i < bytes.size(); ++i)
            if (bytes[i] == '\n') return i;
        throw FormatError("truncated feature store header");
    };
    const std::size_t magic_end = line_end(0);
    if (std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(magic_end)) != kStoreMagic)
        throw FormatError("not a feature store");
    const std::size_t header_end = line_end(magic_end + 1);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(magic_end + 1),
                                       bytes.begin() + static_cast<std::ptrdiff_t>(header_end));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad feature store header: ") + e.what());
    }
    FeatureStore s;
    try {
        s.extractor = header.at("extractor").get<std::string>();
        s.row_ids = header.at("row_ids").get<std::vector<std::string>>();
        const auto rows = header.at("rows").get<std::size_t>();
        const auto cols = header.at("cols").get<std::size_t>();
        const auto layout = layout_from_json(header.at("layout"));
        s.layout = intern_layout(layout.image_width(), layout.image_height(), layout.blocks());
        if (s.layout->size() != cols) throw FormatError("layout size does not match column count");
        const std::size_t payload = bytes.size() - header_end - 1;
        if (cols != 0 && rows > payload / 4 / cols) throw FormatError("feature store payload truncated");
        if (payload != rows * cols * 4) throw FormatError("feature store payload size mismatch");
        s.matrix = FeatureMatrix(rows, cols);
        const std::uint8_t* p = bytes.data() + header_end + 1;
        for (std::size_t i = 0; i < rows * cols; ++i, p += 4) {
            const std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
                                       (std::uint32_t(p[3]) << 24);
            s.matrix.data[i] = std::bit_cast<float>(bits);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad feature store header: ") + e.what());
    }
    return s;
}

inline void save_store(const FeatureStore& s, const std::string& path) { detail::write_file(path, encode_store(s)); }
inline FeatureStore load_store(const std::string& path) { return decode_store(detail::read_file(path)); }

/// Labels file: one 0/1 per line (0 = bona fide, 1 = morph).
inline void save_labels(const LabelColumn& y, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot create '" + path + "'");
    for (auto l : y.labels) out << int(l) << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline LabelColumn load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open labels '" + path + "'");
    std::vector<std::uint8_t> v;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "0")
            v.push_back(0);
        else if (line == "1")
            v.push_back(1);
        else
            throw FormatError("labels file '" + path + "': expected 0 or 1, got '" + line + "'");
    }
    return LabelColumn(std::move(v));
}

inline void write_text(const std::string& path, const std::string& text) {
    detail::write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::string read_text(const std::string& path) {
    const auto bytes = detail::read_file(path);
    return {bytes.begin(), bytes.end()};
}

inline void save_selection(const SelectionResult& r, const std::string& path) {
    write_text(path, to_json(r).dump(2) + "\n");
}

inline SelectionResult load_selection(const std::string& path) {
    try {
        return selection_from_json(nlohmann::json::parse(read_text(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("bad selection file '" + path + "': " + e.what());
    }
}

inline void save_forest(const ForestModel& m, const std::string& path) { detail::write_file(path, serialize(m)); }
inline ForestModel load_forest(const std::string& path) { return deserialize_forest(detail::read_file(path)); }

inline std::string fmt_rate(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

/// train_tool x test_tool grid of D-EER in percent, with per-row averages.
inline std::string protocol_csv(const std::vector<ProtocolTable>& tables) {
    std::ostringstream out;
    out << "train_tool,test_tool,d_eer_percent\n";
    for (const auto& t : tables) {
        for (const auto& r : t.rows) out << t.train_tool << ',' << r.test_tool << ',' << fmt_rate(100.0 * r.d_eer) << '\n';
        out << t.train_tool << ",average," << fmt_rate(100.0 * t.average()) << '\n';
    }
    return out.str();
}

inline std::string det_csv(const std::vector<DetPoint>& curve) {
    std::ostringstream out;
    out << "threshold,apcer,bpcer\n";
    for (const auto& p : curve) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.9g", p.threshold);
        out << buf << ',' << fmt_rate(p.apcer) << ',' << fmt_rate(p.bpcer) << '\n';
    }
    return out.str();
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "k,d_eer_percent,accuracy,bpcer10_percent,bpcer20_percent\n";
    for (const auto& r : rows)
        out << r.k << ',' << fmt_rate(100.0 * r.d_eer) << ',' << fmt_rate(r.accuracy) << ','
            << fmt_rate(100.0 * r.bpcer10) << ',' << fmt_rate(100.0 * r.bpcer20) << '\n';
    return out.str();
}

}  // namespace madsel
