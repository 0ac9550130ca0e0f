#include "morfi/morfi.hpp"

#include "morfi/parallel.hpp"
#include "morfi/resample.hpp"
#include "morfi/trend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace morfi {

namespace {

constexpr Index kReplicatesPerBlock = 32; // fixed so reductions never depend on thread count

struct AxisView {
    Index y_len = 0;
    Index x_len = 0;
    bool trend_is_mixtures = false;
    const std::vector<double>* y_labels = nullptr;
};

AxisView resolve_axes(const ActivationTensor<double>& a, const MorfiConfig& cfg) {
    AxisView v;
    v.trend_is_mixtures = cfg.aggregate_axis == ConditionAxis::epochs;
    v.y_len = v.trend_is_mixtures ? a.mixtures() : a.epochs();
    v.x_len = v.trend_is_mixtures ? a.epochs() : a.mixtures();
    v.y_labels = v.trend_is_mixtures ? &a.mixture_axis : &a.epoch_axis;
    if (v.y_len < 3)
        throw ValidationError("trend axis has fewer than 3 conditions; no trend test possible");
    return v;
}

void validate_config(const MorfiConfig& cfg, Index f) {
    if (cfg.replicates < 1) throw ValidationError("config: replicates must be >= 1");
    if (cfg.top_k < 1) throw ValidationError("config: top_k must be >= 1");
    if (cfg.top_k > f)
        throw ValidationError("config: top_k = " + std::to_string(cfg.top_k) +
                              " exceeds the latent count " + std::to_string(f));
    if (!(cfg.alpha_sig > 0.0) || !(cfg.alpha_sig <= 1.0))
        throw ValidationError("config: alpha_sig must lie in (0, 1]");
}

// Per-block partial sums, reduced in block order afterwards so the floating
// point accumulation order is a pure function of the replicate index.
struct DirectionAccum {
    std::vector<int64_t> count;
    std::vector<double> sum_rho, sum_tau, sum_delta;
    void init(Index f) {
        count.assign(static_cast<size_t>(f), 0);
        sum_rho.assign(static_cast<size_t>(f), 0.0);
        sum_tau.assign(static_cast<size_t>(f), 0.0);
        sum_delta.assign(static_cast<size_t>(f), 0.0);
    }
};

RankedLatentList assemble_list(TrendDirection dir, const DirectionAccum& acc, Index f,
                               Index replicates) {
    RankedLatentList list;
    list.direction = dir;
    for (Index i = 0; i < f; ++i) {
        const auto c = acc.count[static_cast<size_t>(i)];
        if (c == 0) continue; // never selected: not reported
        RankedLatentEntry e;
        e.latent = i;
        e.frequency = static_cast<double>(c) / static_cast<double>(replicates);
        e.mean_rho = acc.sum_rho[static_cast<size_t>(i)] / static_cast<double>(c);
        e.mean_tau = acc.sum_tau[static_cast<size_t>(i)] / static_cast<double>(c);
        e.mean_delta = acc.sum_delta[static_cast<size_t>(i)] / static_cast<double>(c);
        list.entries.push_back(e);
    }
    std::sort(list.entries.begin(), list.entries.end(),
              [](const RankedLatentEntry& a, const RankedLatentEntry& b) {
                  if (a.frequency != b.frequency) return a.frequency > b.frequency;
                  const double da = std::fabs(a.mean_delta), db = std::fabs(b.mean_delta);
                  if (da != db) return da > db;
                  return a.latent < b.latent;
              });
    return list;
}

} // namespace

MonotonicLatents identify_monotonic_latents(const ActivationTensor<double>& a,
                                            const MorfiConfig& cfg) {
    a.validate();
    const Index f = a.latents();
    const Index n = a.samples();
    const Index t_len = a.epochs();
    const Index p_len = a.mixtures();
    validate_config(cfg, f);
    const AxisView ax = resolve_axes(a, cfg);
    const std::vector<double>& vy = *ax.y_labels;

    const BootstrapPlan plan = sample_uniform(cfg.replicates, n, cfg.seed);
    const Index k = cfg.top_k;
    const Index n_blocks = (cfg.replicates + kReplicatesPerBlock - 1) / kReplicatesPerBlock;

    std::vector<DirectionAccum> up_blocks(static_cast<size_t>(n_blocks));
    std::vector<DirectionAccum> down_blocks(static_cast<size_t>(n_blocks));
    constexpr double kInf = std::numeric_limits<double>::infinity();

    parallel_blocks(static_cast<int>(n_blocks), cfg.threads, [&](int block) {
        DirectionAccum& up = up_blocks[static_cast<size_t>(block)];
        DirectionAccum& down = down_blocks[static_cast<size_t>(block)];
        up.init(f);
        down.init(f);

        const Index r0 = static_cast<Index>(block) * kReplicatesPerBlock;
        const Index r1 = std::min<Index>(cfg.replicates, r0 + kReplicatesPerBlock);

        Eigen::VectorXd wtil(n);
        Eigen::MatrixXd mbar(f, ax.y_len); // column y: per-latent replicate means at condition y
        std::vector<double> series(static_cast<size_t>(ax.y_len));
        std::vector<double> delta_up(static_cast<size_t>(f));
        std::vector<double> delta_down(static_cast<size_t>(f));
        std::vector<double> rho_buf(static_cast<size_t>(f));
        std::vector<double> tau_buf(static_cast<size_t>(f));
        std::vector<Index> sel(static_cast<size_t>(k));

        for (Index rep = r0; rep < r1; ++rep) {
            wtil.setZero();
            for (Index x = 0; x < n; ++x) wtil(plan.indices(rep, x)) += plan.weights(rep, x);

            mbar.setZero();
            for (Index ti = 0; ti < t_len; ++ti) {
                for (Index pi = 0; pi < p_len; ++pi) {
                    const Index y = ax.trend_is_mixtures ? pi : ti;
                    const double* slice = a.data.data() + (ti * p_len + pi) * f * n;
                    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                   Eigen::RowMajor>>
                        m(slice, f, n);
                    mbar.col(y).noalias() += m * wtil;
                }
            }
            mbar *= 1.0 / static_cast<double>(ax.x_len);

            for (Index lat = 0; lat < f; ++lat) {
                for (Index y = 0; y < ax.y_len; ++y)
                    series[static_cast<size_t>(y)] = mbar(lat, y);
                const TrendResult sp = spearman_trend(series, vy);
                const TrendResult mk = mann_kendall(series);
                const bool sig = sp.p_value < cfg.alpha_sig && mk.p_value < cfg.alpha_sig;
                double du = -kInf, dd = kInf;
                if (sig && sp.statistic > 0.0 && mk.statistic > 0.0) {
                    du = series[static_cast<size_t>(ax.y_len - 1)] - series[0];
                } else if (sig && sp.statistic < 0.0 && mk.statistic < 0.0) {
                    dd = series[static_cast<size_t>(ax.y_len - 1)] - series[0];
                }
                delta_up[static_cast<size_t>(lat)] = du;
                delta_down[static_cast<size_t>(lat)] = dd;
                rho_buf[static_cast<size_t>(lat)] = sp.statistic;
                tau_buf[static_cast<size_t>(lat)] = mk.statistic;
            }

            top_k_column(delta_up, k, /*largest=*/true, sel.data());
            for (Index i = 0; i < k; ++i) {
                const Index lat = sel[static_cast<size_t>(i)];
                if (lat == kInvalidIndex) break;
                ++up.count[static_cast<size_t>(lat)];
                up.sum_rho[static_cast<size_t>(lat)] += rho_buf[static_cast<size_t>(lat)];
                up.sum_tau[static_cast<size_t>(lat)] += tau_buf[static_cast<size_t>(lat)];
                up.sum_delta[static_cast<size_t>(lat)] += delta_up[static_cast<size_t>(lat)];
            }
            top_k_column(delta_down, k, /*largest=*/false, sel.data());
            for (Index i = 0; i < k; ++i) {
                const Index lat = sel[static_cast<size_t>(i)];
                if (lat == kInvalidIndex) break;
                ++down.count[static_cast<size_t>(lat)];
                down.sum_rho[static_cast<size_t>(lat)] += rho_buf[static_cast<size_t>(lat)];
                down.sum_tau[static_cast<size_t>(lat)] += tau_buf[static_cast<size_t>(lat)];
                down.sum_delta[static_cast<size_t>(lat)] += delta_down[static_cast<size_t>(lat)];
            }
        }
    });

    DirectionAccum up_total, down_total;
    up_total.init(f);
    down_total.init(f);
    for (Index b = 0; b < n_blocks; ++b) {
        const DirectionAccum& ub = up_blocks[static_cast<size_t>(b)];
        const DirectionAccum& db = down_blocks[static_cast<size_t>(b)];
        for (Index i = 0; i < f; ++i) {
            const auto s = static_cast<size_t>(i);
            up_total.count[s] += ub.count[s];
            up_total.sum_rho[s] += ub.sum_rho[s];
            up_total.sum_tau[s] += ub.sum_tau[s];
            up_total.sum_delta[s] += ub.sum_delta[s];
            down_total.count[s] += db.count[s];
            down_total.sum_rho[s] += db.sum_rho[s];
            down_total.sum_tau[s] += db.sum_tau[s];
            down_total.sum_delta[s] += db.sum_delta[s];
        }
    }

    MonotonicLatents out;
    out.increasing = assemble_list(TrendDirection::increasing, up_total, f, cfg.replicates);
    out.decreasing = assemble_list(TrendDirection::decreasing, down_total, f, cfg.replicates);
    return out;
}

CompositeDirection composite_direction(const ActivationTensor<double>& a, const MorfiConfig& cfg) {
    a.validate();
    const AxisView ax = resolve_axes(a, cfg);
    const Index f = a.latents();

    const DenseTensor<double, 3> mean_samples = mean_fold(a.data, 3);     // [T, P, F]
    const int x_dim = ax.trend_is_mixtures ? 0 : 1;
    const DenseTensor<double, 2> mbar = mean_fold(mean_samples, x_dim);   // [Y, F]

    CompositeDirection out;
    out.trend_axis = ax.trend_is_mixtures ? ConditionAxis::mixtures : ConditionAxis::epochs;
    out.delta.resize(f);
    const double* first = mbar.data();
    const double* last = mbar.data() + (ax.y_len - 1) * f;
    for (Index i = 0; i < f; ++i) out.delta(i) = last[i] - first[i];
    return out;
}

std::vector<Index> select_control_group(const ActivationTensor<double>& a, const MorfiConfig& cfg,
                                        Index n_control) {
    a.validate();
    if (n_control < 1) throw ValidationError("control group: n_control must be >= 1");
    const Index f = a.latents();
    if (n_control > f)
        throw ValidationError("control group: n_control exceeds the latent count");
    if (!(cfg.alpha_sig > 0.0) || !(cfg.alpha_sig <= 1.0))
        throw ValidationError("config: alpha_sig must lie in (0, 1]");
    const AxisView ax = resolve_axes(a, cfg);
    const std::vector<double>& vy = *ax.y_labels;

    const DenseTensor<double, 3> mean_samples = mean_fold(a.data, 3);   // [T, P, F]
    const int x_dim = ax.trend_is_mixtures ? 0 : 1;
    const DenseTensor<double, 2> mbar = mean_fold(mean_samples, x_dim); // [Y, F]

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> score(static_cast<size_t>(f));
    std::vector<double> series(static_cast<size_t>(ax.y_len));
    for (Index lat = 0; lat < f; ++lat) {
        for (Index y = 0; y < ax.y_len; ++y)
            series[static_cast<size_t>(y)] = mbar.data()[y * f + lat];
        const TrendResult sp = spearman_trend(series, vy);
        const TrendResult mk = mann_kendall(series);
        const bool sig = sp.p_value < cfg.alpha_sig && mk.p_value < cfg.alpha_sig;
        const bool trending = sig && ((sp.statistic > 0.0 && mk.statistic > 0.0) ||
                                      (sp.statistic < 0.0 && mk.statistic < 0.0));
        score[static_cast<size_t>(lat)] =
            trending ? kInf
                     : std::fabs(series[static_cast<size_t>(ax.y_len - 1)] - series[0]);
    }

    std::vector<Index> sel(static_cast<size_t>(n_control));
    top_k_column(score, n_control, /*largest=*/false, sel.data());
    for (Index i = 0; i < n_control; ++i) {
        if (sel[static_cast<size_t>(i)] == kInvalidIndex)
            throw ValidationError("control group: fewer than " + std::to_string(n_control) +
                                  " non-trending latents available");
    }
    return sel;
}

} // namespace morfi
