#pragma once

// Clustering of the embedding space and distillation of the seed term's
// cluster into a search-term list.

#include "dlmap/common.hpp"
#include "dlmap/rng.hpp"

#include <Eigen/Dense>

#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace dlmap::termcluster {

using Matrix = Eigen::MatrixXd; // rows are points

struct ClusterAssignment {
    std::size_t k = 0;
    std::vector<std::size_t> labels; // per row
    Matrix centroids;                // k x D
    double inertia = 0.0;
    std::size_t iterations = 0;
    std::vector<double> inertia_trace; // after every assignment step
    std::size_t run = 0;               // winning restart
};

struct KMeansConfig {
    std::size_t restarts = 10;
    std::size_t max_iter = 300;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

inline Matrix unit_rows(Matrix m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double n = m.row(i).norm();
        if (n > 0)
            m.row(i) /= n;
    }
    return m;
}

namespace detail {

inline Matrix plus_plus_seed(const Matrix& x, std::size_t k, Rng& rng) {
    const auto n = static_cast<std::size_t>(x.rows());
    Matrix c(static_cast<Eigen::Index>(k), x.cols());
    std::vector<char> chosen(n, 0);
    std::size_t first = rng.below(n);
    c.row(0) = x.row(static_cast<Eigen::Index>(first));
    chosen[first] = 1;
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i)
        d2[i] = (x.row(static_cast<Eigen::Index>(i)) - c.row(0)).squaredNorm();
    for (std::size_t j = 1; j < k; ++j) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            total += chosen[i] ? 0.0 : d2[i];
        std::size_t pick = n;
        if (total > 0.0) {
            double u = rng.uniform() * total, run = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (chosen[i])
                    continue;
                run += d2[i];
                if (run > u) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) // rounding at the top end
                for (std::size_t i = n; i-- > 0;)
                    if (!chosen[i] && d2[i] > 0) {
                        pick = i;
                        break;
                    }
        } else {
            // All remaining points coincide with a centre: pick any unchosen row.
            std::vector<std::size_t> free;
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i])
                    free.push_back(i);
            pick = free[rng.below(free.size())];
        }
        chosen[pick] = 1;
        c.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(pick));
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], (x.row(static_cast<Eigen::Index>(i)) - c.row(static_cast<Eigen::Index>(j))).squaredNorm());
    }
    return c;
}

inline double assign(const Matrix& x, const Matrix& c, std::vector<std::size_t>& labels,
                     std::vector<double>& dist) {
    const auto n = static_cast<std::size_t>(x.rows());
    labels.resize(n);
    dist.resize(n);
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (Eigen::Index j = 0; j < c.rows(); ++j) {
            double d = (x.row(static_cast<Eigen::Index>(i)) - c.row(j)).squaredNorm();
            if (d < best) {
                best = d;
                arg = static_cast<std::size_t>(j);
            }
        }
        labels[i] = arg;
        dist[i] = best;
        inertia += best;
    }
    return inertia;
}

inline ClusterAssignment lloyd(const Matrix& x, std::size_t k, std::size_t max_iter, Rng& rng) {
    ClusterAssignment r;
    r.k = k;
    Matrix c = plus_plus_seed(x, k, rng);
    std::vector<std::size_t> labels, prev;
    std::vector<double> dist;
    bool stable = false;
    for (std::size_t it = 0; it < max_iter; ++it) {
        double inertia = assign(x, c, labels, dist);
        r.inertia_trace.push_back(inertia);
        r.iterations = it + 1;
        if (it > 0 && labels == prev) {
            stable = true;
            break;
        }
        prev = labels;
        Matrix sums = Matrix::Zero(c.rows(), c.cols());
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            sums.row(static_cast<Eigen::Index>(labels[i])) += x.row(static_cast<Eigen::Index>(i));
            ++sizes[labels[i]];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (sizes[j] > 0) {
                c.row(static_cast<Eigen::Index>(j)) = sums.row(static_cast<Eigen::Index>(j)) / static_cast<double>(sizes[j]);
                continue;
            }
            // Empty cluster: move its centre onto the worst-served point.
            std::size_t far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
            c.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(far));
            dist[far] = 0.0;
        }
    }
    if (!stable) {
        r.inertia_trace.push_back(assign(x, c, labels, dist));
    }
    r.labels = std::move(labels);
    r.centroids = std::move(c);
    r.inertia = r.inertia_trace.back();
    return r;
}

} // namespace detail

// Lloyd iterations from k-means++ seeds; best of `restarts` runs by inertia,
// ties to the lowest run index.
inline ClusterAssignment kmeans(const Matrix& x, std::size_t k, const KMeansConfig& cfg = {}) {
    require(k >= 1, "k must be >= 1");
    require(k <= static_cast<std::size_t>(x.rows()),
            "k = " + std::to_string(k) + " exceeds the number of points (" + std::to_string(x.rows()) + ")");
    require(cfg.restarts >= 1, "restarts must be >= 1");
    std::vector<ClusterAssignment> runs(cfg.restarts);
    parallel_for(cfg.restarts, cfg.threads, [&](std::size_t r) {
        Rng rng(derive_seed(cfg.seed, "kmeans.restart", r));
        runs[r] = detail::lloyd(x, k, cfg.max_iter, rng);
        runs[r].run = r;
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].inertia < runs[best].inertia)
            best = r;
    return std::move(runs[best]);
}

struct GapRow {
    std::size_t k = 0;
    double log_w = 0.0;
    double expected_log_w = 0.0;
    double gap = 0.0;
    double se = 0.0; // sd * sqrt(1 + 1/B)
};

struct GapReport {
    std::vector<GapRow> rows;
    std::size_t chosen_k = 1;
};

struct GapConfig {
    std::size_t k_max = 10;
    std::size_t n_refs = 20;
    KMeansConfig kmeans;
};

// Reference sets are uniform in the bounding box of the data expressed in
// its principal axes. Chosen k is the smallest k with
// gap(k) >= gap(k+1) - se(k+1).
inline GapReport gap_statistic(const Matrix& x, const GapConfig& cfg) {
    require(cfg.k_max >= 2, "gap statistic needs k_max >= 2");
    require(cfg.n_refs >= 1, "gap statistic needs at least one reference set");
    require(x.rows() >= 1, "gap statistic needs data");
    GapReport report;
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - mean;
    if (centered.squaredNorm() == 0.0) {
        report.chosen_k = 1;
        return report;
    }
    const std::size_t k_max = std::min<std::size_t>(cfg.k_max, static_cast<std::size_t>(x.rows()));

    Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    const Matrix v = svd.matrixV();
    const Matrix rotated = centered * v;
    const Eigen::RowVectorXd lo = rotated.colwise().minCoeff();
    const Eigen::RowVectorXd hi = rotated.colwise().maxCoeff();

    auto log_w = [&](const Matrix& pts, std::size_t k, std::uint64_t seed) {
        KMeansConfig kc = cfg.kmeans;
        kc.seed = seed;
        kc.threads = 1;
        double w = kmeans(pts, k, kc).inertia;
        return std::log(std::max(w, std::numeric_limits<double>::min()));
    };

    std::vector<std::vector<double>> ref_logw(cfg.n_refs, std::vector<double>(k_max));
    parallel_for(cfg.n_refs, cfg.kmeans.threads, [&](std::size_t b) {
        Rng rng(derive_seed(cfg.kmeans.seed, "gap.reference", b));
        Matrix z(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < z.rows(); ++i)
            for (Eigen::Index j = 0; j < z.cols(); ++j)
                z(i, j) = rng.uniform(lo(j), hi(j));
        Matrix ref = (z * v.transpose()).rowwise() + mean;
        for (std::size_t k = 1; k <= k_max; ++k)
            ref_logw[b][k - 1] = log_w(ref, k, derive_seed(cfg.kmeans.seed, "gap.ref.kmeans", b * 1000 + k));
    });

    for (std::size_t k = 1; k <= k_max; ++k) {
        GapRow row;
        row.k = k;
        row.log_w = log_w(x, k, derive_seed(cfg.kmeans.seed, "gap.data.kmeans", k));
        double m = 0.0;
        for (std::size_t b = 0; b < cfg.n_refs; ++b)
            m += ref_logw[b][k - 1];
        m /= static_cast<double>(cfg.n_refs);
        double var = 0.0;
        for (std::size_t b = 0; b < cfg.n_refs; ++b)
            var += (ref_logw[b][k - 1] - m) * (ref_logw[b][k - 1] - m);
        var /= static_cast<double>(cfg.n_refs);
        row.expected_log_w = m;
        row.gap = m - row.log_w;
        row.se = std::sqrt(var) * std::sqrt(1.0 + 1.0 / static_cast<double>(cfg.n_refs));
        report.rows.push_back(row);
    }
    report.chosen_k = k_max;
    for (std::size_t i = 0; i + 1 < report.rows.size(); ++i) {
        if (report.rows[i].gap >= report.rows[i + 1].gap - report.rows[i + 1].se) {
            report.chosen_k = report.rows[i].k;
            break;
        }
    }
    return report;
}

// ---------------------------------------------------------------- terms

inline std::map<std::string, std::size_t>
label_tokens(const std::vector<std::string>& tokens, const ClusterAssignment& a) {
    require(tokens.size() == a.labels.size(), "token list and cluster labels differ in length");
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < tokens.size(); ++i)
        out[tokens[i]] = a.labels[i];
    return out;
}

inline std::set<std::string> select_seed_cluster(const std::map<std::string, std::size_t>& labels,
                                                 const std::string& seed_token = "deep_learning") {
    auto it = labels.find(seed_token);
    require(it != labels.end(), "seed token '" + seed_token + "' is not in the clustered vocabulary");
    std::set<std::string> out;
    for (const auto& [tok, c] : labels)
        if (c == it->second)
            out.insert(tok);
    return out;
}

struct SearchTermList {
    std::vector<std::string> terms;
    std::vector<std::uint64_t> frequencies; // parallel to terms
};

// Drops unigrams and blocklisted terms, then keeps the max_terms most
// frequent (ties lexicographic).
inline SearchTermList extract_search_terms(const std::set<std::string>& cluster_tokens,
                                           const std::unordered_map<std::string, std::uint64_t>& freqs,
                                           const std::unordered_set<std::string>& blocklist,
                                           std::size_t max_terms = 30) {
    std::vector<std::pair<std::string, std::uint64_t>> keep;
    for (const auto& t : cluster_tokens) {
        if (t.find('_') == std::string::npos || blocklist.count(t))
            continue;
        auto it = freqs.find(t);
        require(it != freqs.end(), "no corpus frequency for term '" + t + "'");
        keep.emplace_back(t, it->second);
    }
    std::sort(keep.begin(), keep.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (keep.size() > max_terms)
        keep.resize(max_terms);
    SearchTermList out;
    for (auto& [t, f] : keep) {
        out.terms.push_back(t);
        out.frequencies.push_back(f);
    }
    return out;
}

inline void write_terms(const std::string& path, const SearchTermList& terms) {
    auto out = open_output(path);
    for (const auto& t : terms.terms)
        out << t << '\n';
}

inline SearchTermList read_terms(const std::string& path) {
    SearchTermList out;
    for (auto& t : read_word_list(path)) {
        out.terms.push_back(t);
        out.frequencies.push_back(0);
    }
    return out;
}

// token, cluster id, frequency; grouped by cluster, most frequent first.
inline void write_cluster_report(const std::string& path, const std::map<std::string, std::size_t>& labels,
                                 const std::unordered_map<std::string, std::uint64_t>& freqs) {
    std::vector<std::tuple<std::size_t, std::uint64_t, std::string>> rows;
    for (const auto& [t, c] : labels) {
        auto it = freqs.find(t);
        rows.emplace_back(c, it == freqs.end() ? 0 : it->second, t);
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b))
            return std::get<0>(a) < std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b))
            return std::get<1>(a) > std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
    });
    auto out = open_output(path);
    out << "token\tcluster\tfrequency\n";
    for (const auto& [c, f, t] : rows)
        out << t << '\t' << c << '\t' << f << '\n';
}

inline std::map<std::string, std::size_t> read_cluster_report(const std::string& path,
                                                              std::unordered_map<std::string, std::uint64_t>* freqs = nullptr) {
    std::map<std::string, std::size_t> labels;
    auto lines = read_lines(path);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty())
            continue;
        auto f = split(lines[i], '\t');
        require(f.size() == 3, path + ": cluster rows need token, cluster, frequency");
        labels[f[0]] = static_cast<std::size_t>(parse_int(f[1], "cluster id"));
        if (freqs)
            (*freqs)[f[0]] = static_cast<std::uint64_t>(parse_int(f[2], "frequency"));
    }
    return labels;
}

inline void write_gap_report(const std::string& path, const GapReport& g) {
    auto out = open_output(path);
    out << "k\tlog_w\texpected_log_w\tgap\tse\tchosen\n";
    for (const auto& r : g.rows)
        out << r.k << '\t' << format_double(r.log_w) << '\t' << format_double(r.expected_log_w) << '\t'
            << format_double(r.gap) << '\t' << format_double(r.se) << '\t' << (r.k == g.chosen_k ? 1 : 0) << '\n';
}

} // namespace dlmap::termcluster
