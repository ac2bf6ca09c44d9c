#pragma once

// Report serialization. Every table starts with a `# run_id=<sha256>` line
// tying it to the manifest of the run that produced it.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "pehaz/core_data.hpp"
#include "pehaz/hazard_estimate.hpp"
#include "pehaz/io.hpp"
#include "pehaz/mrh_sampler.hpp"
#include "pehaz/sim_harness.hpp"
#include "pehaz/variance_analysis.hpp"

namespace pehaz::report {

inline constexpr const char* kSoftwareVersion = "0.1.0";
inline constexpr const char* kSchemaVersion = "1";

using nlohmann::ordered_json;

struct Manifest {
    std::string subcommand;
    std::string input_path;
    std::string input_sha256;
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
    double runtime_seconds = 0.0;
    std::vector<std::string> warnings;
    std::vector<std::pair<std::string, std::string>> outputs;  // file, sha256

    // Everything that determines the results; wall-clock time is left out so
    // identical runs share an id.
    ordered_json content() const
    {
        ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["software_version"] = kSoftwareVersion;
        j["subcommand"] = subcommand;
        j["input_path"] = input_path;
        j["input_sha256"] = input_sha256;
        j["config"] = config;
        j["seed"] = seed;
        j["warnings"] = warnings;
        return j;
    }

    std::string run_id() const { return io::sha256_hex(content().dump()); }

    std::string to_json() const
    {
        auto j = content();
        j["run_id"] = run_id();
        j["runtime_seconds"] = runtime_seconds;
        ordered_json files = ordered_json::array();
        for (auto const& [f, h] : outputs) files.push_back({{"file", f}, {"sha256", h}});
        j["outputs"] = files;
        return j.dump(2) + "\n";
    }
};

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InternalError("cannot write " + path.string());
    out << text;
    if (!out) throw InternalError("write failed for " + path.string());
}

inline std::string header_line(const std::string& run_id) { return "# run_id=" + run_id + "\n"; }

inline std::string hazard_csv(const HazardEstimate& est, const std::string& run_id)
{
    std::ostringstream os;
    os << header_line(run_id);
    os << "bin,start_month,end_month,rate,lower,upper,lower_linear,upper_linear,boundary\n";
    for (std::size_t j = 0; j < est.bins.size(); ++j) {
        auto const& b = est.bins[j];
        const int jj = static_cast<int>(j);
        os << j + 1 << ',' << io::fmt(est.grid.start(jj)) << ',' << io::fmt(est.grid.end(jj)) << ',' << io::fmt(b.estimate)
           << ',' << io::fmt(b.lower) << ',' << io::fmt(b.upper) << ',' << io::fmt(b.lower_linear) << ','
           << io::fmt(b.upper_linear) << ',' << (b.boundary ? 1 : 0) << '\n';
    }
    return os.str();
}

// Inverse of hazard_csv for the per-bin numbers.
inline std::vector<HazardBin> parse_hazard_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::vector<HazardBin> out;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        const auto c = io::split(line);
        if (c.size() != 9) throw ValidationError("hazard table row has " + std::to_string(c.size()) + " cells");
        HazardBin b;
        b.estimate = io::parse_double(c[3], "in hazard table");
        b.lower = io::parse_double(c[4], "in hazard table");
        b.upper = io::parse_double(c[5], "in hazard table");
        b.lower_linear = io::parse_double(c[6], "in hazard table");
        b.upper_linear = io::parse_double(c[7], "in hazard table");
        b.boundary = c[8] == "1";
        out.push_back(b);
    }
    return out;
}

// Effects are on the standardized scale; dividing by `scale` gives the
// effect per raw unit of the covariate.
inline std::string effects_csv(const HazardEstimate& est, const std::vector<CovariateTransform>& transforms,
                               const std::string& run_id)
{
    std::ostringstream os;
    os << header_line(run_id);
    os << "kind,name,estimate,se,lower,upper,center,scale\n";
    auto row = [&](const char* kind, const EffectSummary& e) {
        double center = 0.0, scale = 1.0;
        for (auto const& t : transforms)
            if (t.name == e.name) {
                center = t.center;
                scale = t.scale;
            }
        os << kind << ',' << e.name << ',' << io::fmt(e.estimate) << ',' << io::fmt(e.se) << ',' << io::fmt(e.lower) << ','
           << io::fmt(e.upper) << ',' << io::fmt(center) << ',' << io::fmt(scale) << '\n';
    };
    for (auto const& e : est.fixed_effects) row("fixed", e);
    for (auto const& e : est.varying_effects) row("varying", e);
    return os.str();
}

inline std::string fitted_counts_csv(const BinnedCohort& cohort, const Eigen::MatrixXd& fitted, const std::string& run_id)
{
    std::ostringstream os;
    os << header_line(run_id);
    os << "group,bin,observed,fitted\n";
    for (int i = 0; i < cohort.groups(); ++i)
        for (int j = 0; j < cohort.bins(); ++j)
            os << cohort.group_labels[static_cast<std::size_t>(i)] << ',' << j + 1 << ',' << cohort.failures(i, j) << ','
               << io::fmt(fitted(i, j)) << '\n';
    return os.str();
}

// Y - Yhat, sqrt((Y - Yhat)^2), and running totals over the whole study
// period multiplied by the bin width.
inline std::string residuals_csv(const BinnedCohort& cohort, const Eigen::MatrixXd& fitted, const std::string& run_id)
{
    std::ostringstream os;
    os << header_line(run_id);
    os << "group,bin,difference,abs_difference,integrated_abs,integrated_sq_root\n";
    const double w = cohort.grid.width;
    double cum_abs = 0.0, cum_sq = 0.0;
    for (int i = 0; i < cohort.groups(); ++i)
        for (int j = 0; j < cohort.bins(); ++j) {
            const double diff = static_cast<double>(cohort.failures(i, j)) - fitted(i, j);
            cum_abs += w * std::abs(diff);
            cum_sq += w * diff * diff;
            os << cohort.group_labels[static_cast<std::size_t>(i)] << ',' << j + 1 << ',' << io::fmt(diff) << ','
               << io::fmt(std::sqrt(diff * diff)) << ',' << io::fmt(cum_abs) << ',' << io::fmt(std::sqrt(cum_sq)) << '\n';
        }
    return os.str();
}

inline std::vector<std::string> chain_columns(const PosteriorChain& chain)
{
    std::vector<std::string> cols{"iteration", "H"};
    for (int m = 1; m <= chain.depth; ++m)
        for (int p = 0; p < (1 << (m - 1)); ++p) cols.push_back("R_" + std::to_string(m) + "_" + std::to_string(p));
    for (auto const& n : chain.fixed_names) cols.push_back("beta_" + n);
    for (auto const& n : chain.varying_names) cols.push_back("alpha_" + n);
    cols.insert(cols.end(), {"a", "b", "k"});
    for (int m = 1; m <= chain.depth; ++m)
        for (int p = 0; p < (1 << (m - 1)); ++p) cols.push_back("gamma_" + std::to_string(m) + "_" + std::to_string(p));
    for (int j = 1; j <= (1 << chain.depth); ++j) cols.push_back("d_" + std::to_string(j));
    return cols;
}

inline std::string chain_csv(const PosteriorChain& chain, const std::string& run_id)
{
    std::ostringstream os;
    os << header_line(run_id);
    const auto cols = chain_columns(chain);
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
    os << '\n';
    for (auto const& d : chain.draws) {
        os << d.iteration << ',' << io::fmt(d.H);
        for (double r : d.R) os << ',' << io::fmt(r);
        for (Eigen::Index s = 0; s < d.beta.size(); ++s) os << ',' << io::fmt(d.beta(s));
        for (Eigen::Index s = 0; s < d.alpha.size(); ++s) os << ',' << io::fmt(d.alpha(s));
        os << ',' << d.a << ',' << io::fmt(d.b) << ',' << io::fmt(d.k);
        for (double g : d.gamma) os << ',' << io::fmt(g);
        for (Eigen::Index j = 0; j < d.d.size(); ++j) os << ',' << io::fmt(d.d(j));
        os << '\n';
    }
    return os.str();
}

inline std::string chain_metadata_json(const PosteriorChain& chain, const PosteriorSummary& summary, const std::string& run_id)
{
    ordered_json j;
    j["run_id"] = run_id;
    j["seed"] = chain.seed;
    j["iterations"] = chain.iterations;
    j["burn_in"] = chain.burn_in;
    j["thin"] = chain.thin;
    j["retained_draws"] = chain.draws.size();
    ordered_json acc, scales, ess;
    for (auto const& [k, v] : chain.acceptance_rates) acc[k] = std::isnan(v) ? ordered_json(nullptr) : ordered_json(v);
    for (auto const& [k, v] : chain.final_scales) scales[k] = v;
    for (auto const& [k, v] : summary.effective_sample_size) ess[k] = v;
    j["acceptance_rates"] = acc;
    j["adapted_proposal_scales"] = scales;
    j["effective_sample_size"] = ess;
    j["few_draws_warning"] = summary.few_draws;
    return j.dump(2) + "\n";
}

inline std::string variance_curves_csv(const std::vector<VarianceCurveRow>& rows, const std::string& run_id)
{
    std::ostringstream os;
    os << header_line(run_id);
    os << "R,H,censor_pct,g1,g2,var_glm1,var_mrh1\n";
    for (auto const& r : rows)
        os << io::fmt(r.R) << ',' << io::fmt(r.H) << ',' << io::fmt(r.censor_pct) << ',' << io::fmt(r.g1) << ','
           << io::fmt(r.g2) << ',' << io::fmt(r.var_glm1) << ',' << io::fmt(r.var_mrh1) << '\n';
    return os.str();
}

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline std::string simulation_json(const SimulationReport& rep, const std::string& run_id)
{
    ordered_json j;
    j["run_id"] = run_id;
    j["replicates"] = rep.config.n_replicates;
    j["bin_width"] = rep.bin_width;
    j["mean_censor_pct"] = rep.mean_censor_pct;
    j["mean_yearly_events"] = rep.mean_yearly_events;
    j["true_rate"] = to_vector(rep.truth.lambda);
    j["true_alpha"] = to_vector(rep.truth.alpha);
    ordered_json ests = ordered_json::array();
    for (auto const& e : rep.estimators) {
        ordered_json x;
        x["method"] = e.method;
        x["replicates_used"] = e.replicates_used;
        x["failures"] = e.failures;
        x["failure_messages"] = e.failure_messages;
        x["integrated_abs_bias"] = e.integrated_abs_bias;
        x["integrated_rmse"] = e.integrated_rmse;
        x["overall_coverage"] = e.overall_coverage;
        ordered_json effects = ordered_json::array();
        for (auto const& f : e.effects)
            effects.push_back({{"name", f.name},
                               {"truth", f.truth},
                               {"mean", f.mean},
                               {"sd", f.sd},
                               {"q025", f.lower_quantile},
                               {"q975", f.upper_quantile}});
        x["effects"] = effects;
        ests.push_back(x);
    }
    j["estimators"] = ests;
    // nlohmann prints doubles with round-trip precision.
    return j.dump(2) + "\n";
}

inline std::string simulation_per_bin_csv(const SimulationReport& rep, const std::string& run_id)
{
    std::ostringstream os;
    os << header_line(run_id);
    os << "method,bin,truth,mean,q025,q975,sd,bias,rmse,coverage\n";
    for (auto const& e : rep.estimators) {
        if (e.replicates_used == 0) continue;
        for (Eigen::Index j = 0; j < rep.truth.lambda.size(); ++j)
            os << e.method << ',' << j + 1 << ',' << io::fmt(rep.truth.lambda(j)) << ',' << io::fmt(e.mean(j)) << ','
               << io::fmt(e.lower_quantile(j)) << ',' << io::fmt(e.upper_quantile(j)) << ',' << io::fmt(e.sd(j)) << ','
               << io::fmt(e.bias(j)) << ',' << io::fmt(e.rmse(j)) << ',' << io::fmt(e.coverage(j)) << '\n';
    }
    return os.str();
}

}  // namespace pehaz::report
