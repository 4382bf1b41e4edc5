#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mfg/riccati.hpp"
#include "mfg/simulate.hpp"
#include "mfg/stationary.hpp"
#include "mfg/verify.hpp"

namespace mfg {

// Shortest round-trip decimal representation; all numeric artifact output
// funnels through this so reruns are byte-identical.
std::string fmt_double(double v);

void write_text_file(const std::string& path, const std::string& content);

// One row per node: t, vec(P) row-major, vec(K), phi, self gain, mf gain,
// control offset.
std::string riccati_csv(const RiccatiSolution& solution, const FeedbackLaw& law);

// N, epsilon, stderr rows.
std::string epsilon_csv(const std::vector<SweepPoint>& sweep);

// Long-format trajectories: t, agent id (or avg / bar), state components,
// control components.
std::string trajectories_csv(const PopulationPath& path);

nlohmann::json stationary_report_json(const StationarySolution& solution,
                                      const StationaryFeedback& feedback,
                                      const ModelParams& params);
nlohmann::json nash_report_json(const NashReport& report);

struct SvgSeries {
    std::string label;
    std::vector<double> x, y;
    std::string color = "#1f6fb2";
    double width = 1.5;
    bool in_legend = true;
};

// Minimal self-contained SVG line chart (axes, ticks, legend).
std::string svg_chart(const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<SvgSeries>& series);

} // namespace mfg
