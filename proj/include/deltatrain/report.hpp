#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "deltatrain/errors.hpp"
#include "deltatrain/util.hpp"

namespace deltatrain {

struct ReportBundle {
    std::vector<std::string> files; // paths written, in emission order
};

namespace detail {

struct LoadedRun {
    std::string path;
    std::string stem;
    nlohmann::json j;
};

inline const nlohmann::json& req(const nlohmann::json& j, const char* name, const std::string& file) {
    if (!j.contains(name))
        throw DataError(file + ": missing field '" + std::string(name) + "'");
    return j.at(name);
}

inline LoadedRun load_run_manifest(const std::string& path) {
    LoadedRun run;
    run.path = path;
    run.stem = std::filesystem::path(path).stem().string();
    try {
        run.j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path + ": " + e.what());
    }
    if (req(run.j, "schema", path).get<std::string>() != "deltatrain-run-v1")
        throw DataError(path + ": unsupported schema");
    return run;
}

// One curve row per meta-epoch plus, when the run flooded, a trailing "final"
// row one slot past the last meta-epoch.
inline std::string curve_csv(const LoadedRun& run) {
    const std::string& f = run.path;
    const auto seed = req(req(run.j, "config", f), "run_seed", f).get<long long>();
    std::string out =
        "seed,meta_epoch,acc_rand_test,acc_emb_test,TT,TF,FT,FF,"
        "acc_rand_dev,acc_emb_dev,unlabeled_acc_rand,unlabeled_acc_emb,n_selected,pool_remaining,stage\n";
    int last_epoch = -1;
    for (const auto& r : req(run.j, "records", f)) {
        const auto& q = req(r, "quadrants", f);
        last_epoch = req(r, "meta_epoch", f).get<int>();
        out += std::to_string(seed) + "," + std::to_string(last_epoch) + "," +
               format_double(req(r, "test_acc_rand", f).get<double>()) + "," +
               format_double(req(r, "test_acc_emb", f).get<double>()) + "," +
               format_double(req(q, "TT", f).get<double>()) + "," +
               format_double(req(q, "TF", f).get<double>()) + "," +
               format_double(req(q, "FT", f).get<double>()) + "," +
               format_double(req(q, "FF", f).get<double>()) + "," +
               format_double(req(r, "dev_acc_rand", f).get<double>()) + "," +
               format_double(req(r, "dev_acc_emb", f).get<double>()) + "," +
               format_double(req(r, "unlabeled_acc_rand", f).get<double>()) + "," +
               format_double(req(r, "unlabeled_acc_emb", f).get<double>()) + "," +
               std::to_string(req(r, "n_selected", f).get<int>()) + "," +
               std::to_string(req(r, "pool_remaining", f).get<int>()) + ",meta\n";
    }
    const auto& flood = req(run.j, "flood", f);
    if (!flood.is_null()) {
        out += std::to_string(seed) + "," + std::to_string(last_epoch + 1) + "," +
               format_double(req(flood, "test_acc_rand", f).get<double>()) + "," +
               format_double(req(flood, "test_acc_emb", f).get<double>()) + ",,,,," +
               format_double(req(flood, "dev_acc_rand", f).get<double>()) + "," +
               format_double(req(flood, "dev_acc_emb", f).get<double>()) + ",,," +
               std::to_string(req(flood, "n_added", f).get<int>()) + ",0,final\n";
    }
    return out;
}

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

// Minimal self-contained SVG line chart; no plotting dependency.
inline std::string line_chart_svg(const std::string& title, const std::vector<Series>& series) {
    const double W = 640, H = 400, ml = 60, mr = 20, mt = 40, mb = 40;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (first) {
                xmin = xmax = x;
                ymin = ymax = y;
                first = false;
            }
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmax - xmin < 1e-12) xmax = xmin + 1;
    if (ymax - ymin < 1e-12) ymax = ymin + 1;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
                      "viewBox=\"0 0 640 400\">\n";
    svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    svg += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"15\">" + title + "</text>\n";
    svg += "<line x1=\"" + format_double(ml) + "\" y1=\"" + format_double(H - mb) + "\" x2=\"" +
           format_double(W - mr) + "\" y2=\"" + format_double(H - mb) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + format_double(ml) + "\" y1=\"" + format_double(mt) + "\" x2=\"" +
           format_double(ml) + "\" y2=\"" + format_double(H - mb) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        svg += "<text x=\"" + format_double(ml - 6) + "\" y=\"" + format_double(py(yv) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
               format_double(yv) + "</text>\n";
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        svg += "<text x=\"" + format_double(px(xv)) + "\" y=\"" + format_double(H - mb + 16) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               format_double(xv) + "</text>\n";
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        if (s.points.empty()) continue;
        std::string pts;
        for (const auto& [x, y] : s.points)
            pts += format_double(px(x)) + "," + format_double(py(y)) + " ";
        const char* color = colors[si % 8];
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" "
               "points=\"" + pts + "\"/>\n";
        svg += "<text x=\"" + format_double(W - mr - 4) + "\" y=\"" +
               format_double(mt + 14 * static_cast<double>(si) + 10) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + color +
               "\">" + s.name + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace detail

// Deterministic CSV tables (and optional SVG charts) regenerated from run
// manifests: a curve file per run, a cross-framework comparison, and a
// per-fraction sweep summary. Re-running on the same manifests is
// byte-identical.
inline ReportBundle emit_reports(const std::vector<std::string>& manifest_paths,
                                 const std::string& out_dir, bool svg = false) {
    if (manifest_paths.empty()) throw DataError("no runs");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    ReportBundle bundle;

    std::vector<detail::LoadedRun> runs;
    runs.reserve(manifest_paths.size());
    for (const auto& p : manifest_paths) runs.push_back(detail::load_run_manifest(p));

    for (const auto& run : runs) {
        const std::string path = (fs::path(out_dir) / ("curve_" + run.stem + ".csv")).string();
        write_file(path, detail::curve_csv(run));
        bundle.files.push_back(path);
    }

    // comparison: one row per (framework, seed, meta_epoch) plus final rows
    {
        std::string out = "framework,seed,fraction,meta_epoch,acc_emb_test,acc_rand_test,stage\n";
        for (const auto& run : runs) {
            const std::string& f = run.path;
            const std::string fw = detail::req(run.j, "framework", f).get<std::string>();
            const auto seed =
                detail::req(detail::req(run.j, "config", f), "run_seed", f).get<long long>();
            const double frac =
                detail::req(detail::req(run.j, "data", f), "labeled_fraction", f).get<double>();
            int last_epoch = -1;
            for (const auto& r : detail::req(run.j, "records", f)) {
                last_epoch = detail::req(r, "meta_epoch", f).get<int>();
                out += fw + "," + std::to_string(seed) + "," + format_double(frac) + "," +
                       std::to_string(last_epoch) + "," +
                       format_double(detail::req(r, "test_acc_emb", f).get<double>()) + "," +
                       format_double(detail::req(r, "test_acc_rand", f).get<double>()) + ",meta\n";
            }
            const auto& flood = detail::req(run.j, "flood", f);
            const double final_acc = detail::req(run.j, "final_test_accuracy", f).get<double>();
            out += fw + "," + std::to_string(seed) + "," + format_double(frac) + "," +
                   std::to_string(last_epoch + 1) + "," + format_double(final_acc) + "," +
                   (flood.is_null() ? ""
                                    : format_double(detail::req(flood, "test_acc_rand", f).get<double>())) +
                   ",final\n";
        }
        const std::string path = (fs::path(out_dir) / "comparison.csv").string();
        write_file(path, out);
        bundle.files.push_back(path);
    }

    // sweep: final accuracy per (framework, fraction, seed)
    {
        std::string out = "framework,fraction,seed,final_test_accuracy,best_meta_epoch\n";
        for (const auto& run : runs) {
            const std::string& f = run.path;
            out += detail::req(run.j, "framework", f).get<std::string>() + "," +
                   format_double(
                       detail::req(detail::req(run.j, "data", f), "labeled_fraction", f).get<double>()) +
                   "," +
                   std::to_string(
                       detail::req(detail::req(run.j, "config", f), "run_seed", f).get<long long>()) +
                   "," + format_double(detail::req(run.j, "final_test_accuracy", f).get<double>()) +
                   "," + std::to_string(detail::req(run.j, "best_meta_epoch", f).get<int>()) + "\n";
        }
        const std::string path = (fs::path(out_dir) / "sweep.csv").string();
        write_file(path, out);
        bundle.files.push_back(path);
    }

    if (svg) {
        for (const auto& run : runs) {
            const std::string& f = run.path;
            detail::Series emb{"emb_test", {}}, rand{"rand_test", {}};
            detail::Series tt{"TT", {}}, tf{"TF", {}}, ft{"FT", {}}, ff{"FF", {}};
            for (const auto& r : detail::req(run.j, "records", f)) {
                const double x = detail::req(r, "meta_epoch", f).get<int>();
                emb.points.emplace_back(x, detail::req(r, "test_acc_emb", f).get<double>());
                rand.points.emplace_back(x, detail::req(r, "test_acc_rand", f).get<double>());
                const auto& q = detail::req(r, "quadrants", f);
                tt.points.emplace_back(x, detail::req(q, "TT", f).get<double>());
                tf.points.emplace_back(x, detail::req(q, "TF", f).get<double>());
                ft.points.emplace_back(x, detail::req(q, "FT", f).get<double>());
                ff.points.emplace_back(x, detail::req(q, "FF", f).get<double>());
            }
            const std::string path = (fs::path(out_dir) / ("curve_" + run.stem + ".svg")).string();
            write_file(path, detail::line_chart_svg(run.stem, {emb, rand, tt, tf, ft, ff}));
            bundle.files.push_back(path);
        }
    }
    return bundle;
}

} // namespace deltatrain
