#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "reswvl/core/errors.hpp"
#include "reswvl/data/ingest.hpp"

namespace reswvl {

/// Prediction file for one video: `second<TAB>gt_phase<TAB>pred_phase`.
struct PredictionFile {
    std::string video_id;
    std::vector<int> gt;
    std::vector<int> pred;
};

inline void write_prediction_tsv(const std::filesystem::path& path, const std::vector<int>& gt,
                                 const std::vector<int>& pred) {
    if (gt.size() != pred.size())
        throw EvalError("prediction tsv: gt and pred lengths differ for " + path.string());
    std::ofstream out(path);
    if (!out) throw EvalError("prediction tsv: cannot write " + path.string());
    for (std::size_t t = 0; t < gt.size(); ++t)
        out << t << '\t' << gt[t] << '\t' << pred[t] << '\n';
}

inline PredictionFile read_prediction_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw EvalError("prediction tsv: cannot open " + path.string());
    PredictionFile f;
    f.video_id = path.stem().string();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = detail::split_fields(detail::strip_cr(line));
        if (fields.size() != 3)
            throw EvalError(path.string() + ":" + std::to_string(lineno) +
                            ": expected `second<TAB>gt_phase<TAB>pred_phase`");
        const int second = detail::parse_int_field(fields[0], path.string(), lineno);
        if (second != static_cast<int>(f.gt.size()))
            throw EvalError(path.string() + ":" + std::to_string(lineno) +
                            ": seconds must be consecutive from 0");
        f.gt.push_back(detail::parse_int_field(fields[1], path.string(), lineno));
        f.pred.push_back(detail::parse_int_field(fields[2], path.string(), lineno));
    }
    if (f.gt.empty()) throw EvalError("prediction tsv: empty file " + path.string());
    return f;
}

/// All prediction TSVs in a directory, in natural video order.
inline std::vector<PredictionFile> read_prediction_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw EvalError("prediction directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".tsv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
        return natural_less(a.filename().string(), b.filename().string());
    });
    if (files.empty()) throw EvalError("no prediction files in " + dir.string());
    std::vector<PredictionFile> out;
    for (const auto& f : files) out.push_back(read_prediction_tsv(f));
    return out;
}

}  // namespace reswvl
