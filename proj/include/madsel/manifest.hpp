#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "madsel/error.hpp"
#include "madsel/infotheory.hpp"
#include "madsel/rng.hpp"

namespace madsel {

enum class Label { bonafide = 0, morph = 1 };

struct ManifestEntry {
    std::string path;     ///< relative to the manifest's directory unless absolute
    Label label = Label::bonafide;
    std::string tool;     ///< morphing tool tag, empty for bona fide
    std::string subject;  ///< identity; morphs list contributors joined by '+'

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// One row per image: path,label,tool,subject.
struct DatasetManifest {
    std::string name;
    std::vector<ManifestEntry> entries;

    void validate() const {
        for (const auto& e : entries) {
            if (e.subject.empty()) throw FormatError("manifest entry '" + e.path + "' has no subject id");
            if ((e.label == Label::morph) == e.tool.empty())
                throw FormatError("manifest entry '" + e.path + "': tool tag must be present iff label is morph");
        }
    }

    LabelColumn labels() const {
        std::vector<std::uint8_t> l;
        l.reserve(entries.size());
        for (const auto& e : entries) l.push_back(e.label == Label::morph ? 1 : 0);
        return LabelColumn(std::move(l));
    }

    /// Morph tool tags in order of first appearance.
    std::vector<std::string> tools() const {
        std::vector<std::string> out;
        for (const auto& e : entries)
            if (!e.tool.empty() && std::find(out.begin(), out.end(), e.tool) == out.end()) out.push_back(e.tool);
        return out;
    }
};

inline std::vector<std::string> split_subjects(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, '+'))
        if (!part.empty()) out.push_back(part);
    return out;
}

inline std::string to_csv(const DatasetManifest& m) {
    std::ostringstream out;
    out << "# dataset=" << m.name << "\n";
    out << "path,label,tool,subject\n";
    for (const auto& e : m.entries)
        out << e.path << ',' << (e.label == Label::morph ? "morph" : "bonafide") << ',' << e.tool << ','
            << e.subject << '\n';
    return out.str();
}

inline DatasetManifest manifest_from_csv(const std::string& text) {
    DatasetManifest m;
    std::istringstream in(text);
    std::string line;
    bool header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("# dataset=", 0) == 0) {
            m.name = line.substr(10);
            continue;
        }
        if (line[0] == '#') continue;
        if (!header) {
            if (line != "path,label,tool,subject") throw FormatError("manifest header must be 'path,label,tool,subject'");
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (line.back() == ',') f.emplace_back();
        if (f.size() != 4) throw FormatError("manifest line " + std::to_string(lineno) + ": expected 4 fields");
        ManifestEntry e;
        e.path = f[0];
        if (f[1] == "bonafide")
            e.label = Label::bonafide;
        else if (f[1] == "morph")
            e.label = Label::morph;
        else
            throw FormatError("manifest line " + std::to_string(lineno) + ": unknown label '" + f[1] + "'");
        e.tool = f[2];
        e.subject = f[3];
        m.entries.push_back(std::move(e));
    }
    if (!header) throw FormatError("manifest has no header");
    m.validate();
    return m;
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return manifest_from_csv(ss.str());
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot create manifest '" + path + "'");
    out << to_csv(m);
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::string resolve_path(const std::string& manifest_path, const std::string& entry_path) {
    const std::filesystem::path p(entry_path);
    if (p.is_absolute()) return entry_path;
    return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

/// Identity groups: subjects linked through a morph must land on the same side
/// of any split. Returns one group id per entry (ids dense, in order of first
/// appearance).
inline std::vector<std::size_t> identity_groups(const DatasetManifest& m) {
    std::map<std::string, std::size_t> ids;
    std::vector<std::size_t> parent;
    auto id_of = [&](const std::string& s) {
        auto [it, inserted] = ids.try_emplace(s, parent.size());
        if (inserted) parent.push_back(parent.size());
        return it->second;
    };
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    std::vector<std::size_t> first(m.entries.size());
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        const auto subs = split_subjects(m.entries[i].subject);
        if (subs.empty()) throw FormatError("entry without subject id");
        first[i] = id_of(subs[0]);
        for (std::size_t k = 1; k < subs.size(); ++k) {
            const auto a = find(first[i]), b = find(id_of(subs[k]));
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }
    std::map<std::size_t, std::size_t> dense;
    std::vector<std::size_t> out(m.entries.size());
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        const auto root = find(first[i]);
        out[i] = dense.try_emplace(root, dense.size()).first->second;
    }
    return out;
}

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Throws ProtocolError if any subject appears on both sides.
inline void check_subject_disjoint(const DatasetManifest& m, const Split& s) {
    std::set<std::string> train_subjects;
    for (auto i : s.train)
        for (const auto& sub : split_subjects(m.entries.at(i).subject)) train_subjects.insert(sub);
    for (auto i : s.test)
        for (const auto& sub : split_subjects(m.entries.at(i).subject))
            if (train_subjects.count(sub))
                throw ProtocolError("subject '" + sub + "' appears in both training and testing partitions");
}

/// Subject-disjoint train/test split. Identity groups are shuffled with the
/// seed and round(train_fraction * groups) of them go to training. Both
/// partitions receive at least one group.
inline Split subject_disjoint_split(const DatasetManifest& m, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ArgumentError("train fraction must be in (0, 1)");
    const auto groups = identity_groups(m);
    const std::size_t g = groups.empty() ? 0 : *std::max_element(groups.begin(), groups.end()) + 1;
    if (g < 2) throw ProtocolError("need at least two independent identity groups to split");
    std::vector<std::size_t> order(g);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(g)));
    n_train = std::clamp<std::size_t>(n_train, 1, g - 1);
    std::vector<char> is_train(g, 0);
    for (std::size_t i = 0; i < n_train; ++i) is_train[order[i]] = 1;
    Split s;
    for (std::size_t i = 0; i < m.entries.size(); ++i) (is_train[groups[i]] ? s.train : s.test).push_back(i);
    check_subject_disjoint(m, s);
    return s;
}

}  // namespace madsel
