#include "mfg/artifacts.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mfg/errors.hpp"

namespace mfg {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write file: " + path);
    out << content;
}

namespace {

void append_mat_header(std::string& header, const std::string& name, int rows, int cols) {
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            header += "," + name + "_" + std::to_string(i) + "_" + std::to_string(j);
}

void append_vec_header(std::string& header, const std::string& name, int nsize) {
    for (int i = 0; i < nsize; ++i) header += "," + name + "_" + std::to_string(i);
}

void append_mat_row(std::string& row, const Mat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) row += "," + fmt_double(m(i, j));
}

void append_vec_row(std::string& row, const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) row += "," + fmt_double(v(i));
}

} // namespace

std::string riccati_csv(const RiccatiSolution& sol, const FeedbackLaw& law) {
    const int n = int(sol.P.front().rows());
    const int r = int(law.self_gain.front().rows());
    std::string out = "t";
    append_mat_header(out, "P", n, n);
    append_mat_header(out, "K", n, n);
    append_vec_header(out, "phi", n);
    append_mat_header(out, "self_gain", r, n);
    append_mat_header(out, "mf_gain", r, n);
    append_vec_header(out, "offset", r);
    out += "\n";
    for (int k = 0; k < sol.grid.size(); ++k) {
        std::string row = fmt_double(sol.grid.node(k));
        append_mat_row(row, sol.P[size_t(k)]);
        append_mat_row(row, sol.K[size_t(k)]);
        append_vec_row(row, sol.phi[size_t(k)]);
        append_mat_row(row, law.self_gain[size_t(k)]);
        append_mat_row(row, law.mf_gain[size_t(k)]);
        append_vec_row(row, law.offset[size_t(k)]);
        out += row + "\n";
    }
    return out;
}

std::string epsilon_csv(const std::vector<SweepPoint>& sweep) {
    std::string out = "N,epsilon,stderr\n";
    for (const auto& pt : sweep)
        out += std::to_string(pt.N) + "," + fmt_double(pt.epsilon.mean) + "," +
               fmt_double(pt.epsilon.stderr_) + "\n";
    return out;
}

std::string trajectories_csv(const PopulationPath& path) {
    const int n = int(path.x.front().rows());
    const int r = int(path.u.front().rows());
    std::string out = "t,agent";
    append_vec_header(out, "x", n);
    append_vec_header(out, "u", r);
    out += "\n";
    for (int k = 0; k < path.grid.size(); ++k) {
        const std::string t_str = fmt_double(path.grid.node(k));
        for (int a = 0; a < path.N; ++a) {
            std::string row = t_str + "," + std::to_string(a);
            append_vec_row(row, path.x[size_t(k)].col(a));
            append_vec_row(row, path.u[size_t(k)].col(a));
            out += row + "\n";
        }
        std::string avg_row = t_str + ",avg";
        append_vec_row(avg_row, path.x_avg[size_t(k)]);
        append_vec_row(avg_row, Vec(path.u[size_t(k)].rowwise().mean()));
        out += avg_row + "\n";
        std::string bar_row = t_str + ",bar";
        append_vec_row(bar_row, path.x_bar[size_t(k)]);
        append_vec_row(bar_row, path.u_bar[size_t(k)]);
        out += bar_row + "\n";
    }
    return out;
}

namespace {

json vec_json(const Vec& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json mat_json(const Mat& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(row);
    }
    return out;
}

json spectrum_json(const Mat& m) {
    Eigen::EigenSolver<Mat> es(m, false);
    json out = json::array();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        out.push_back({{"re", es.eigenvalues()(i).real()}, {"im", es.eigenvalues()(i).imag()}});
    return out;
}

} // namespace

json stationary_report_json(const StationarySolution& sol, const StationaryFeedback& fb,
                            const ModelParams& m) {
    json j;
    j["P"] = mat_json(sol.P);
    j["K"] = mat_json(sol.K);
    j["Pi"] = mat_json(sol.Pi);
    j["phi_bar"] = vec_json(sol.phi_bar);
    j["route"] = sol.route;
    j["certified"] = sol.certified;
    j["stabilizing"] = sol.stabilizing;
    j["residuals"] = {{"P", sol.residual_P}, {"K", sol.residual_K}, {"Pi", sol.residual_Pi}};
    j["gains"] = {{"self_gain", mat_json(fb.self_gain)},
                  {"mf_gain", mat_json(fb.mf_gain)},
                  {"offset", vec_json(fb.offset)}};
    j["stability"] = {
        {"deviation_loop_ms_stable", fb.deviation_loop_stable},
        {"meanfield_loop_ms_stable", fb.meanfield_loop_stable},
        {"deviation_loop_growth_rate",
         ms_growth_rate(m.A + m.B * fb.self_gain, m.C + m.D * fb.self_gain,
                        m.C0 + m.D0 * fb.self_gain)},
        {"meanfield_loop_growth_rate",
         ms_growth_rate(m.A + m.G + m.B * fb.mf_gain, Mat::Zero(m.dims.n, m.dims.n),
                        m.C0 + m.F0 + m.D0 * fb.mf_gain)},
    };
    j["spectra"] = {{"closed_loop_drift", spectrum_json(m.A + m.B * fb.self_gain)},
                    {"aggregate_drift", spectrum_json(m.A + m.G + m.B * fb.mf_gain)}};
    for (char variant : {'a', 'b'}) {
        try {
            const CSplittingMatrix cs = build_csplitting(m, sol.P, variant);
            j["csplitting"][std::string(1, variant)] = {
                {"eigen_split", {{"left", cs.n_left}, {"right", cs.n_right}, {"boundary", cs.n_boundary}}},
                {"spectrum", spectrum_json(cs.M)}};
        } catch (const SolverError& e) {
            j["csplitting"][std::string(1, variant)] = {{"inapplicable", e.what()}};
        }
    }
    return j;
}

json nash_report_json(const NashReport& report) {
    json j;
    json entries = json::array();
    for (const auto& e : report.entries)
        entries.push_back({{"deviation", e.deviation},
                           {"N", e.N},
                           {"delta_j", e.delta_j.mean},
                           {"stderr", e.delta_j.stderr_}});
    j["delta_j"] = entries;
    j["fitted_c"] = report.fitted_c;
    j["epsilon_hat"] = report.epsilon_hat;
    j["N_test"] = report.N_test;
    j["min_delta_j"] = report.min_delta_j;
    j["worst_deviation"] = report.worst_deviation;
    j["null_delta_j"] = report.null_delta_j;
    j["gain_scale_0.5"] = {{"delta_j", report.reference_gain_scale.mean},
                           {"stderr", report.reference_gain_scale.stderr_}};
    j["pass"] = report.pass;
    return j;
}

namespace {

std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

} // namespace

std::string svg_chart(const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<SvgSeries>& series) {
    const double width = 760, height = 480;
    const double ml = 70, mr = 20, mt = 40, mb = 50;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (first) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                first = false;
            } else {
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
            }
        }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
    auto py = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(width) +
                      "\" height=\"" + svg_num(height) + "\" viewBox=\"0 0 " + svg_num(width) + " " +
                      svg_num(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + svg_num(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
           "font-family=\"sans-serif\">" + title + "</text>\n";
    // axes
    svg += "<line x1=\"" + svg_num(ml) + "\" y1=\"" + svg_num(height - mb) + "\" x2=\"" +
           svg_num(width - mr) + "\" y2=\"" + svg_num(height - mb) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + svg_num(ml) + "\" y1=\"" + svg_num(mt) + "\" x2=\"" + svg_num(ml) +
           "\" y2=\"" + svg_num(height - mb) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 5.0;
        const double yv = ymin + (ymax - ymin) * i / 5.0;
        svg += "<line x1=\"" + svg_num(px(xv)) + "\" y1=\"" + svg_num(height - mb) + "\" x2=\"" +
               svg_num(px(xv)) + "\" y2=\"" + svg_num(height - mb + 5) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + svg_num(px(xv)) + "\" y=\"" + svg_num(height - mb + 18) +
               "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" +
               tick_label(xv) + "</text>\n";
        svg += "<line x1=\"" + svg_num(ml - 5) + "\" y1=\"" + svg_num(py(yv)) + "\" x2=\"" +
               svg_num(ml) + "\" y2=\"" + svg_num(py(yv)) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + svg_num(ml - 8) + "\" y=\"" + svg_num(py(yv) + 4) +
               "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" +
               tick_label(yv) + "</text>\n";
    }
    svg += "<text x=\"" + svg_num((ml + width - mr) / 2) + "\" y=\"" + svg_num(height - 12) +
           "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" + xlabel +
           "</text>\n";
    svg += "<text x=\"16\" y=\"" + svg_num((mt + height - mb) / 2) +
           "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" transform=\"rotate(-90 "
           "16 " + svg_num((mt + height - mb) / 2) + ")\">" + ylabel + "</text>\n";

    for (const auto& s : series) {
        std::string pts;
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            pts += svg_num(px(s.x[i])) + "," + svg_num(py(s.y[i])) + " ";
        }
        svg += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"" +
               svg_num(s.width) + "\" points=\"" + pts + "\"/>\n";
    }
    double ly = mt + 8;
    for (const auto& s : series) {
        if (!s.in_legend) continue;
        svg += "<line x1=\"" + svg_num(width - mr - 150) + "\" y1=\"" + svg_num(ly) + "\" x2=\"" +
               svg_num(width - mr - 126) + "\" y2=\"" + svg_num(ly) + "\" stroke=\"" + s.color +
               "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + svg_num(width - mr - 120) + "\" y=\"" + svg_num(ly + 4) +
               "\" font-size=\"12\" font-family=\"sans-serif\">" + s.label + "</text>\n";
        ly += 16;
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace mfg
