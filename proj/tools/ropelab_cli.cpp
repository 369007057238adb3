// Copyright (c) 2026 The ropelab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ============================================================================
// ropelab: command-line driver for the experiments and checks. Every output
// goes to files under --out; stdout stays empty and diagnostics go to stderr.
// Exit codes: 0 all checks passed, 1 some check failed, 2 usage or I/O error.
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ropelab/analysis.hpp"
#include "ropelab/constructions.hpp"
#include "ropelab/errors.hpp"
#include "ropelab/experiments.hpp"
#include "ropelab/io.hpp"
#include "ropelab/parallel.hpp"
#include "ropelab/theory_checks.hpp"

namespace fs = std::filesystem;
using namespace ropelab;

namespace {

constexpr int kExitFailedCheck = 1;
constexpr int kExitUsage = 2;

struct Common {
    std::string out = "ropelab_out";
    int threads = 0;
    std::uint64_t seed = 0;
};

struct RunConfig {
    Common common;
    double theta = 10000.0;
    int d = 256;
    std::int64_t n = 8192;
    std::int64_t max_r = 8192;
    std::int64_t n_trials = 100;
    std::vector<std::int64_t> l_values;
    std::vector<std::int64_t> r_values{0, 1, 100, 10000};
    int resamples = kRandomRopeResamples;
    int seeds = 50;
    int draws = 100;
    int instances = 200;
    int bins = 64;
    int evaluations = kPRoPEEvaluations;
    double angle = 1.0;
    double psi_norm_sq = 10.0;
    std::int64_t r = 0;
    bool identical = false;
    bool gaussian = false;
    std::string kind;
    std::string input;
    std::string tensor = "Q";
    std::string group_by = "layer";
    std::uint32_t layer = 0;
    int hi_band = kDefaultHiBand;
    double ratio_threshold = kDefaultRatioThreshold;
    std::uint32_t layers = 1;
    std::uint32_t heads = 16;
    std::vector<std::uint32_t> positional_heads{5, 8};
};

void add_common(CLI::App *sub, Common &c) {
    sub->add_option("--out", c.out, "Output directory")->envname("ROPELAB_OUT_DIR");
    sub->add_option("--threads", c.threads, "Worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", c.seed, "Random seed");
}

fs::path out_path(const RunConfig &cfg, const std::string &name) { return fs::path(cfg.common.out) / name; }

template <typename T>
void write_with(const fs::path &path, const T &obj) {
    std::ostringstream os;
    write_csv(os, obj);
    write_file(path, os.str());
}

void write_curve(const RunConfig &cfg, const std::string &stem, const DecayCurve &curve) {
    write_with(out_path(cfg, stem + ".csv"), curve);
    write_file(out_path(cfg, stem + ".json"), metadata_json(curve));
}

int write_verdicts(const RunConfig &cfg, const std::string &stem, const std::vector<CheckVerdict> &verdicts) {
    std::string lines;
    bool all = true;
    for (const CheckVerdict &v : verdicts) {
        lines += to_json_line(v) + "\n";
        all = all && v.passed;
        if (!v.passed) std::cerr << "check failed: " << v.name << ": " << v.detail << "\n";
    }
    write_file(out_path(cfg, stem + ".jsonl"), lines);
    return all ? 0 : kExitFailedCheck;
}

int run_decay_constant(const RunConfig &cfg) {
    write_curve(cfg, "decay_constant", constant_decay_curve(cfg.theta, cfg.d, cfg.max_r));
    return 0;
}

int run_decay_gaussian(const RunConfig &cfg) {
    const auto pairing = cfg.identical ? GaussianPairing::Identical : GaussianPairing::Independent;
    const DecayCurve curve = gaussian_decay_curve(cfg.theta, cfg.d, cfg.max_r, cfg.n_trials, cfg.common.seed, pairing);
    const std::string stem = cfg.identical ? "decay_gaussian_identical" : "decay_gaussian";
    write_curve(cfg, stem, curve);
    if (cfg.identical) return 0;
    return write_verdicts(cfg, stem, {trend_check(curve)});
}

int run_decay_random_rope(const RunConfig &cfg) {
    std::vector<std::int64_t> ls = cfg.l_values;
    if (ls.empty()) ls = {cfg.max_r, 2 * cfg.max_r, 4 * cfg.max_r};
    const auto curves = cfg.gaussian
                            ? random_rope_gaussian_decay(cfg.theta, cfg.d, cfg.max_r, ls, cfg.common.seed, cfg.resamples)
                            : random_rope_decay(cfg.theta, cfg.d, cfg.max_r, ls, cfg.common.seed, cfg.resamples);
    const std::string prefix = cfg.gaussian ? "decay_random_rope_gaussian_L" : "decay_random_rope_L";
    for (const DecayCurve &c : curves) write_curve(cfg, prefix + std::to_string(*c.metadata.max_position), c);
    return 0;
}

int run_decay_constant_gaussian(const RunConfig &cfg) {
    const auto pairing = cfg.identical ? GaussianPairing::Identical : GaussianPairing::Independent;
    const std::string stem = cfg.identical ? "decay_constant_gaussian_identical" : "decay_constant_gaussian";
    write_curve(cfg, stem, constant_gaussian_control(cfg.theta, cfg.d, cfg.max_r, cfg.common.seed, pairing));
    if (cfg.identical) return 0;
    return write_verdicts(cfg, stem, {envelope_check(cfg.theta, cfg.d, cfg.max_r, cfg.common.seed, cfg.seeds)});
}

const std::map<std::string, ConstructionKind> kConstructionKinds{
    {"diagonal", ConstructionKind::Diagonal},
    {"previous-token", ConstructionKind::PreviousToken},
    {"arbitrary-distance", ConstructionKind::ArbitraryDistance},
    {"apostrophe", ConstructionKind::Apostrophe},
};

int run_construct(const RunConfig &cfg) {
    Construction cons;
    cons.kind = kConstructionKinds.at(cfg.kind);
    cons.r = cfg.r;
    cons.sched = make_schedule(cfg.theta, cfg.d);
    cons.psi = cons.kind == ConstructionKind::Apostrophe ? apostrophe_default_psi(cfg.d)
                                                         : equal_chunk_psi(cfg.psi_norm_sq, cfg.d);
    if (cons.kind == ConstructionKind::ArbitraryDistance && cfg.r < 0) {
        throw Error(ErrorCode::InvalidRange, "--r must be >= 0");
    }
    const HeadSequence seq = build(cons, cfg.n);
    const ActivationMatrix act = activations(seq, EncodingKind::rope(), cons.sched);
    const AttentionMatrix att = attention(act);
    const std::string stem = "construct_" + cfg.kind;
    write_with(out_path(cfg, stem + "_activations.csv"), static_cast<const CausalMatrix &>(act));
    write_with(out_path(cfg, stem + "_attention.csv"), static_cast<const CausalMatrix &>(att));
    write_with(out_path(cfg, stem + "_bound_gap.csv"), cauchy_schwarz_diag(seq, cons.sched));
    if (cons.kind == ConstructionKind::Apostrophe) {
        write_with(out_path(cfg, stem + "_channel1.csv"), apostrophe_channel_report(seq, 1, cons.sched));
        write_with(out_path(cfg, stem + "_semantic.csv"),
                   apostrophe_channel_report(seq, cons.apostrophe.semantic_index, cons.sched));
        return 0;
    }

    std::int64_t shift = 0;
    if (cons.kind == ConstructionKind::PreviousToken) shift = 1;
    if (cons.kind == ConstructionKind::ArbitraryDistance) shift = cfg.r;
    std::int64_t rows = 0;
    std::int64_t hits = 0;
    double min_alpha = 1.0;
    for (std::int64_t i = shift; i < cfg.n; ++i) {
        const RowArgmax top = argmax_row(att, i);
        ++rows;
        if (!top.tied && top.index == i - shift) ++hits;
        min_alpha = std::min(min_alpha, att.at(i, i - shift));
    }
    CheckVerdict v;
    v.name = "construct_row_argmax";
    v.passed = hits == rows;
    v.statistic = static_cast<double>(hits);
    v.threshold = static_cast<double>(rows);
    v.seed = cfg.common.seed;
    std::ostringstream os;
    os << cfg.kind << " d=" << cfg.d << " N=" << cfg.n << " shift=" << shift << ": " << hits << "/" << rows
       << " rows peak at i-" << shift << "; min target alpha=" << min_alpha;
    v.detail = os.str();
    return write_verdicts(cfg, stem, {v});
}

int run_swap_attack(const RunConfig &cfg) {
    return write_verdicts(cfg, "swap_attack", {swap_attack_check(cfg.angle, cfg.n, cfg.instances, cfg.common.seed)});
}

int run_check_gaussian_mean(const RunConfig &cfg) {
    const auto pairing = cfg.identical ? GaussianPairing::Identical : GaussianPairing::Independent;
    std::vector<CheckVerdict> out;
    for (std::int64_t r : cfg.r_values) {
        out.push_back(gaussian_expectation_check(cfg.d, r, cfg.n_trials, cfg.common.seed, cfg.theta, pairing));
    }
    return write_verdicts(cfg, "check_gaussian_mean", out);
}

int run_check_nope(const RunConfig &cfg) {
    CheckVerdict equal;
    equal.name = "nope_equal_logit";
    const double alpha = nope_equal_logit_alpha();
    equal.statistic = std::abs(alpha - 1.0 / 3.0);
    equal.threshold = 1e-12;
    equal.passed = equal.statistic <= equal.threshold;
    equal.detail = "alpha33 with equal logits = " + format_double(alpha);
    equal.seed = cfg.common.seed;
    return write_verdicts(cfg, "check_nope", {nope_counterexample_check(cfg.common.seed, cfg.draws, cfg.d), equal});
}

int run_check_density(const RunConfig &cfg) {
    std::int64_t n = cfg.n;
    if (n <= 0) n = static_cast<std::int64_t>(std::ceil(8.0 * cfg.bins / std::abs(cfg.angle)));
    return write_verdicts(cfg, "check_density", {density_cover_check(cfg.angle, n, cfg.bins)});
}

int run_prope_suite(const RunConfig &cfg) {
    return write_verdicts(cfg, "prope_suite", prope_equivalence_suite(cfg.theta, cfg.d, cfg.common.seed, cfg.evaluations));
}

Tensor parse_tensor(const std::string &s) {
    if (s == "Q") return Tensor::Q;
    if (s == "K") return Tensor::K;
    return Tensor::V;
}

int run_analyze_norms(const RunConfig &cfg) {
    const QKVTensorFile file = read_qkt1(fs::path(cfg.input));
    const GroupBy group = cfg.group_by == "head" ? GroupBy::Head : GroupBy::Layer;
    const NormProfile p = profile(file, parse_tensor(cfg.tensor), group, cfg.layer);
    std::string stem = "norms_" + cfg.tensor + "_by_" + cfg.group_by;
    if (group == GroupBy::Head) stem += "_layer" + std::to_string(cfg.layer);
    write_with(out_path(cfg, stem + ".csv"), p);
    return 0;
}

int run_detect_heads(const RunConfig &cfg) {
    const QKVTensorFile file = read_qkt1(fs::path(cfg.input));
    const NormProfile pq = profile(file, Tensor::Q, GroupBy::Head, cfg.layer);
    const NormProfile pk = profile(file, Tensor::K, GroupBy::Head, cfg.layer);
    const auto heads = detect_positional_heads(pq, pk, cfg.hi_band, cfg.ratio_threshold);
    const std::string suffix = "_layer" + std::to_string(cfg.layer);
    write_with(out_path(cfg, "norms_Q_by_head" + suffix + ".csv"), pq);
    write_with(out_path(cfg, "norms_K_by_head" + suffix + ".csv"), pk);
    std::ostringstream os;
    os << "{\"layer\": " << cfg.layer << ", \"hi_band\": " << cfg.hi_band
       << ", \"ratio_threshold\": " << format_double(cfg.ratio_threshold) << ", \"heads\": [";
    for (std::size_t i = 0; i < heads.size(); ++i) os << (i ? ", " : "") << heads[i];
    os << "]}\n";
    write_file(out_path(cfg, "positional_heads" + suffix + ".json"), os.str());
    return 0;
}

int run_emit_fixture(const RunConfig &cfg) {
    const auto n = static_cast<std::uint32_t>(cfg.n);
    const auto d = static_cast<std::uint32_t>(cfg.d);
    QKVTensorFile f;
    if (cfg.kind == "gaussian") {
        f = gaussian_fixture(cfg.layers, cfg.heads, n, d, cfg.common.seed);
    } else if (cfg.kind == "positional-heads") {
        for (std::uint32_t h : cfg.positional_heads) {
            if (h >= cfg.heads) throw Error(ErrorCode::IndexOutOfRange, "positional head index out of range");
        }
        f = positional_heads_fixture(cfg.layers, cfg.heads, n, d, cfg.common.seed, cfg.positional_heads);
    } else {
        f = diagonal_fixture(cfg.layers, cfg.heads, n, d, cfg.common.seed);
    }
    write_qkt1(out_path(cfg, "fixture_" + cfg.kind + ".qkt1"), f);
    return 0;
}

using Handler = std::function<int(const RunConfig &)>;

struct Sub {
    CLI::App *app;
    Handler run;
};

void add_theta_d(CLI::App *s, RunConfig &c) {
    s->add_option("--theta", c.theta, "Base wavelength")->check(CLI::PositiveNumber);
    s->add_option("--d", c.d, "Head dimension (even)")->check(CLI::PositiveNumber);
}

int run(int argc, char **argv) {
    CLI::App app{"ropelab: rotary positional encoding experiments and checks"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(build_version()));

    // One config per subcommand so per-command defaults show in --help.
    std::map<std::string, RunConfig> cfgs;
    std::vector<Sub> subs;
    const auto sub = [&](const std::string &name, const std::string &desc, Handler h,
                         const std::function<void(RunConfig &)> &defaults = {}) {
        RunConfig &c = cfgs[name];
        if (defaults) defaults(c);
        CLI::App *s = app.add_subcommand(name, desc);
        add_common(s, c.common);
        subs.push_back({s, std::move(h)});
        return std::pair<CLI::App *, RunConfig *>{s, &c};
    };

    {
        auto [s, c] = sub("decay-constant", "RoPE activation of all-ones query/key vs distance", run_decay_constant);
        add_theta_d(s, *c);
        s->add_option("--max-r", c->max_r, "Largest relative distance")->check(CLI::PositiveNumber);
    }
    {
        auto [s, c] = sub("decay-gaussian", "Monte-Carlo activation of Gaussian query/key pairs vs distance",
                          run_decay_gaussian);
        add_theta_d(s, *c);
        s->add_option("--max-r", c->max_r, "Largest relative distance")->check(CLI::PositiveNumber);
        s->add_option("--n-trials", c->n_trials, "Pairs per distance (>= 100)");
        s->add_flag("--identical", c->identical, "Use q = k in every trial");
    }
    {
        auto [s, c] = sub("decay-random-rope", "Constant (or Gaussian) curves under randomized positions",
                          run_decay_random_rope);
        add_theta_d(s, *c);
        s->add_option("--max-r", c->max_r, "Largest nominal distance N")->check(CLI::PositiveNumber);
        s->add_option("--L", c->l_values, "Position ranges L (default N, 2N, 4N)");
        s->add_option("--resamples", c->resamples, "Position resamplings per L");
        s->add_flag("--gaussian", c->gaussian, "Fresh Gaussian pairs instead of all-ones vectors");
    }
    {
        auto [s, c] = sub("decay-constant-gaussian", "One Gaussian query/key pair repeated at every position",
                          run_decay_constant_gaussian);
        add_theta_d(s, *c);
        s->add_option("--max-r", c->max_r, "Largest relative distance")->check(CLI::PositiveNumber);
        s->add_option("--seeds", c->seeds, "Seeds in the envelope check")->check(CLI::PositiveNumber);
        s->add_flag("--identical", c->identical, "Use q = k");
    }
    {
        auto [s, c] = sub("construct", "Build a RoPE construction and write its matrices", run_construct,
                          [](RunConfig &c) {
                              c.kind = "diagonal";
                              c.n = 64;
                          });
        add_theta_d(s, *c);
        s->add_option("--kind", c->kind, "Construction")
            ->check(CLI::IsMember({"diagonal", "previous-token", "arbitrary-distance", "apostrophe"}));
        s->add_option("--psi-norm-sq", c->psi_norm_sq, "Squared norm of psi")->check(CLI::NonNegativeNumber);
        s->add_option("--n", c->n, "Sequence length")->check(CLI::PositiveNumber);
        s->add_option("--r", c->r, "Target distance for arbitrary-distance")->check(CLI::NonNegativeNumber);
    }
    {
        auto [s, c] = sub("swap-attack", "Swap search on random single-frequency heads", run_swap_attack,
                          [](RunConfig &c) { c.n = 200; });
        s->add_option("--g", c->angle, "Rotation angle per token");
        s->add_option("--n", c->n, "Sequence length")->check(CLI::Range(3, 1 << 20));
        s->add_option("--instances", c->instances, "Random instances")->check(CLI::PositiveNumber);
    }
    {
        auto [s, c] = sub("check-gaussian-mean", "Zero-mean check of q^T R^r k for Gaussian q, k",
                          run_check_gaussian_mean, [](RunConfig &c) { c.n_trials = 100000; });
        add_theta_d(s, *c);
        s->add_option("--r", c->r_values, "Relative distances");
        s->add_option("--n", c->n_trials, "Samples per distance (>= 1000)");
        s->add_flag("--identical", c->identical, "Use q = k");
    }
    {
        auto [s, c] = sub("check-nope", "Repeated-token counterexample without positional encoding", run_check_nope,
                          [](RunConfig &c) { c.d = 8; });
        s->add_option("--d", c->d, "Head dimension (even)")->check(CLI::PositiveNumber);
        s->add_option("--draws", c->draws, "Random embedding draws")->check(CLI::PositiveNumber);
    }
    {
        auto [s, c] = sub("check-density", "Coverage of the circle by n g mod 2 pi", run_check_density,
                          [](RunConfig &c) { c.n = 0; });
        s->add_option("--g", c->angle, "Rotation angle per token");
        s->add_option("--n", c->n, "Multiples to visit (0 = recommended)");
        s->add_option("--bins", c->bins, "Equal arcs")->check(CLI::Range(4, 1 << 20));
    }
    {
        auto [s, c] = sub("prope-suite", "p-RoPE endpoint and mask structure checks", run_prope_suite);
        add_theta_d(s, *c);
        s->add_option("--evaluations", c->evaluations, "Random kernel evaluations")->check(CLI::PositiveNumber);
    }
    {
        auto [s, c] = sub("analyze-norms", "Mean chunk norms of a QKT1 file", run_analyze_norms);
        s->add_option("--input", c->input, "QKT1 file")->required();
        s->add_option("--tensor", c->tensor, "Q, K or V")->check(CLI::IsMember({"Q", "K", "V"}));
        s->add_option("--group-by", c->group_by, "layer or head")->check(CLI::IsMember({"layer", "head"}));
        s->add_option("--layer", c->layer, "Layer for --group-by head");
    }
    {
        auto [s, c] = sub("detect-heads", "Flag heads whose Q and K favor the fastest frequencies", run_detect_heads);
        s->add_option("--input", c->input, "QKT1 file")->required();
        s->add_option("--layer", c->layer, "Layer to scan");
        s->add_option("--hi-band", c->hi_band, "Number of fastest frequencies")->check(CLI::PositiveNumber);
        s->add_option("--ratio-threshold", c->ratio_threshold, "Band / overall mean norm ratio")
            ->check(CLI::PositiveNumber);
    }
    {
        auto [s, c] = sub("emit-fixture", "Write a synthetic QKT1 fixture", run_emit_fixture, [](RunConfig &c) {
            c.kind = "gaussian";
            c.n = 1024;
            c.d = 64;
        });
        s->add_option("--kind", c->kind, "Fixture")->check(CLI::IsMember({"gaussian", "positional-heads", "diagonal"}));
        s->add_option("--layers", c->layers, "Layers")->check(CLI::PositiveNumber);
        s->add_option("--heads", c->heads, "Heads per layer")->check(CLI::PositiveNumber);
        s->add_option("--n", c->n, "Tokens")->check(CLI::Range(1, 1 << 24));
        s->add_option("--d", c->d, "Head dimension (even)")->check(CLI::PositiveNumber);
        s->add_option("--positional-heads", c->positional_heads, "Heads given positional mass");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    for (const Sub &s : subs) {
        if (!s.app->parsed()) continue;
        const RunConfig &cfg = cfgs.at(s.app->get_name());
        try {
            set_num_threads(cfg.common.threads);
            return s.run(cfg);
        } catch (const std::exception &e) {
            std::cerr << "ropelab " << s.app->get_name() << ": " << e.what() << "\n";
            return kExitUsage;
        }
    }
    return kExitUsage;
}

}  // namespace

int main(int argc, char **argv) { return run(argc, argv); }
