#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "reswvl/core/errors.hpp"

namespace reswvl {

/// Ordered set of phase names. Phase ids are 1-based everywhere outside the
/// numeric kernels; the 0-based conversion happens at exactly one boundary
/// (batch assembly).
class PhaseVocabulary {
public:
    PhaseVocabulary() = default;

    explicit PhaseVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
        if (names_.empty()) throw DataError("vocabulary: no phase names");
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i].empty())
                throw DataError("vocabulary: empty phase name at position " + std::to_string(i + 1));
            if (!index_.emplace(names_[i], static_cast<int>(i) + 1).second)
                throw DataError("vocabulary: duplicate phase name '" + names_[i] + "'");
        }
    }

    int phase_count() const { return static_cast<int>(names_.size()); }

    const std::string& name(int phase_id) const {
        if (phase_id < 1 || phase_id > phase_count())
            throw DataError("vocabulary: phase id " + std::to_string(phase_id) + " out of range 1.." +
                            std::to_string(phase_count()));
        return names_[static_cast<std::size_t>(phase_id) - 1];
    }

    /// Returns the 1-based id, or 0 when the name is unknown.
    int id_of(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? 0 : it->second;
    }

    const std::vector<std::string>& names() const { return names_; }

    /// phases.json is a JSON array of names; array order defines the ids.
    static PhaseVocabulary load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("vocabulary: cannot open " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError("vocabulary: invalid JSON in " + path.string() + ": " + e.what());
        }
        if (!j.is_array())
            throw DataError("vocabulary: " + path.string() + " must be a JSON array of phase names");
        std::vector<std::string> names;
        for (const auto& v : j) {
            if (!v.is_string())
                throw DataError("vocabulary: non-string entry in " + path.string());
            names.push_back(v.get<std::string>());
        }
        return PhaseVocabulary(std::move(names));
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw DataError("vocabulary: cannot write " + path.string());
        out << nlohmann::json(names_).dump(2) << "\n";
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace reswvl
