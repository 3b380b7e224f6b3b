#pragma once

// DTW dissimilarity and PAM k-medoids over short annual series.

#include "dlmap/common.hpp"
#include "dlmap/csv.hpp"
#include "dlmap/rng.hpp"

#include <json.hpp>

#include <map>
#include <numeric>
#include <optional>

namespace dlmap::tsclust {

struct TimeSeries {
    std::string id;
    int start_year = 0;
    std::vector<double> values;
};

struct DtwOptions {
    std::optional<std::size_t> band; // Sakoe-Chiba half width, |i - j| <= band
    bool squared = false;
};

inline double dtw(const std::vector<double>& a, const std::vector<double>& b, const DtwOptions& opt = {}) {
    require(!a.empty() && !b.empty(), "dtw of an empty series");
    const std::size_t n = a.size(), m = b.size();
    const std::size_t gap = n > m ? n - m : m - n;
    if (opt.band)
        require(*opt.band >= gap, "dtw band " + std::to_string(*opt.band) + " cannot reach the end cell (length gap " +
                                      std::to_string(gap) + ")");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        std::fill(cur.begin(), cur.end(), inf);
        std::size_t lo = 1, hi = m;
        if (opt.band) {
            lo = i > *opt.band ? std::max<std::size_t>(1, i - *opt.band) : 1;
            hi = std::min(m, i + *opt.band);
        }
        for (std::size_t j = lo; j <= hi; ++j) {
            double d = a[i - 1] - b[j - 1];
            d = opt.squared ? d * d : std::abs(d);
            cur[j] = d + std::min({prev[j - 1], prev[j], cur[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

inline std::vector<double> z_normalize(const std::vector<double>& v) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    std::vector<double> out(v.size(), 0.0);
    if (sd > 0.0)
        for (std::size_t i = 0; i < v.size(); ++i)
            out[i] = (v[i] - mean) / sd;
    return out;
}

using DistanceMatrix = std::vector<std::vector<double>>;

inline DistanceMatrix distance_matrix(const std::vector<TimeSeries>& series, const DtwOptions& opt = {},
                                      bool normalize = false, unsigned threads = 1) {
    const std::size_t n = series.size();
    std::vector<std::vector<double>> vals(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (double x : series[i].values)
            require(std::isfinite(x), "series " + series[i].id + " has a non-finite value");
        vals[i] = normalize ? z_normalize(series[i].values) : series[i].values;
    }
    DistanceMatrix d(n, std::vector<double>(n, 0.0));
    parallel_for(n, threads, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j)
            d[i][j] = dtw(vals[i], vals[j], opt);
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            d[i][j] = d[j][i];
    return d;
}

struct MedoidClustering {
    std::size_t k = 0;
    std::vector<std::size_t> medoids;  // series indices, ascending
    std::vector<std::size_t> labels;   // index into medoids
    double total_cost = 0.0;
    std::vector<double> cost_trace;    // after build, then after each swap
};

namespace detail {

inline double assignment_cost(const DistanceMatrix& d, const std::vector<std::size_t>& medoids) {
    double cost = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (auto m : medoids)
            best = std::min(best, d[i][m]);
        cost += best;
    }
    return cost;
}

} // namespace detail

struct PamConfig {
    std::uint64_t seed = 1;
    std::size_t max_iter = 100;
};

// BUILD then steepest-descent SWAP until no swap lowers the cost. The seed
// fixes the candidate scan order, which only matters for exact ties.
inline MedoidClustering kmedoids(const DistanceMatrix& d, std::size_t k, const PamConfig& cfg = {}) {
    const std::size_t n = d.size();
    require(k >= 1, "k must be at least 1");
    require(k <= n, "k = " + std::to_string(k) + " exceeds the number of series (" + std::to_string(n) + ")");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, "tsclust.pam", 0));
    rng.shuffle(order);

    std::vector<std::size_t> medoids;
    std::vector<char> is_medoid(n, 0);
    double cost = std::numeric_limits<double>::infinity();
    while (medoids.size() < k) {
        std::size_t best = n;
        double best_cost = std::numeric_limits<double>::infinity();
        for (auto c : order) {
            if (is_medoid[c])
                continue;
            medoids.push_back(c);
            double t = detail::assignment_cost(d, medoids);
            medoids.pop_back();
            if (t < best_cost) {
                best_cost = t;
                best = c;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = 1;
        cost = best_cost;
    }
    MedoidClustering out;
    out.cost_trace.push_back(cost);
    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        double best_cost = cost;
        std::size_t best_pos = k, best_cand = n;
        for (std::size_t pos = 0; pos < k; ++pos)
            for (auto c : order) {
                if (is_medoid[c])
                    continue;
                auto trial = medoids;
                trial[pos] = c;
                double t = detail::assignment_cost(d, trial);
                if (t < best_cost - 1e-12 * (1.0 + std::abs(cost))) {
                    best_cost = t;
                    best_pos = pos;
                    best_cand = c;
                }
            }
        if (best_cand == n)
            break;
        is_medoid[medoids[best_pos]] = 0;
        is_medoid[best_cand] = 1;
        medoids[best_pos] = best_cand;
        cost = best_cost;
        out.cost_trace.push_back(cost);
    }
    std::sort(medoids.begin(), medoids.end());
    out.k = k;
    out.medoids = medoids;
    out.labels.assign(n, 0);
    out.total_cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (d[i][medoids[c]] < d[i][medoids[best]])
                best = c;
        out.labels[i] = best;
        out.total_cost += d[i][medoids[best]];
    }
    return out;
}

inline double silhouette(const DistanceMatrix& d, const std::vector<std::size_t>& labels, std::size_t k) {
    const std::size_t n = d.size();
    std::vector<std::size_t> size(k, 0);
    for (auto l : labels)
        ++size[l];
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (size[labels[i]] <= 1)
            continue; // singleton contributes 0
        std::vector<double> sum(k, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i)
                sum[labels[j]] += d[i][j];
        double a = sum[labels[i]] / static_cast<double>(size[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (c != labels[i] && size[c] > 0)
                b = std::min(b, sum[c] / static_cast<double>(size[c]));
        double m = std::max(a, b);
        if (m > 0.0 && std::isfinite(b))
            total += (b - a) / m;
    }
    return total / static_cast<double>(n);
}

// Mean silhouette for k = 2..6 (capped at n - 1).
inline std::vector<std::pair<std::size_t, double>> silhouette_profile(const DistanceMatrix& d,
                                                                      const PamConfig& cfg = {}) {
    std::vector<std::pair<std::size_t, double>> out;
    if (d.size() < 3)
        return out;
    for (std::size_t k = 2; k <= std::min<std::size_t>(6, d.size() - 1); ++k) {
        auto c = kmedoids(d, k, cfg);
        out.emplace_back(k, silhouette(d, c.labels, k));
    }
    return out;
}

// Long format: series_id,year,value. Years of a series must be contiguous.
inline std::vector<TimeSeries> read_series(const std::string& path) {
    auto t = csv::read_table(path);
    auto ci = t.column("series_id"), cy = t.column("year"), cv = t.column("value");
    std::map<std::string, std::map<int, double>> raw;
    for (const auto& r : t.rows) {
        int y = static_cast<int>(parse_int(r[cy], "year"));
        double v = parse_double(r[cv], "value");
        require(std::isfinite(v), path + ": non-finite value for " + r[ci]);
        require(raw[r[ci]].emplace(y, v).second, path + ": duplicate year " + r[cy] + " for " + r[ci]);
    }
    std::vector<TimeSeries> out;
    for (const auto& [id, ys] : raw) {
        TimeSeries s{id, ys.begin()->first, {}};
        int expect = s.start_year;
        for (const auto& [y, v] : ys) {
            require(y == expect, path + ": series " + id + " skips year " + std::to_string(expect));
            s.values.push_back(v);
            ++expect;
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline void write_labels(const std::string& path, const std::vector<TimeSeries>& series, const MedoidClustering& c) {
    auto out = open_output(path);
    out << "series_id,cluster,medoid\n";
    for (std::size_t i = 0; i < series.size(); ++i)
        out << csv::quote(series[i].id) << ',' << c.labels[i] << ',' << series[c.medoids[c.labels[i]]].id << '\n';
}

inline void write_distance_matrix(const std::string& path, const std::vector<TimeSeries>& series,
                                  const DistanceMatrix& d) {
    auto out = open_output(path);
    out << "series_id";
    for (const auto& s : series)
        out << '\t' << s.id;
    out << '\n';
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << series[i].id;
        for (double v : d[i])
            out << '\t' << format_double(v);
        out << '\n';
    }
}

// Per cluster and year: min, mean, max over member series covering the year.
inline nlohmann::ordered_json envelopes(const std::vector<TimeSeries>& series, const MedoidClustering& c) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < c.k; ++k) {
        std::map<int, std::vector<double>> by_year;
        nlohmann::ordered_json members = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < series.size(); ++i) {
            if (c.labels[i] != k)
                continue;
            members.push_back(series[i].id);
            for (std::size_t t = 0; t < series[i].values.size(); ++t)
                by_year[series[i].start_year + static_cast<int>(t)].push_back(series[i].values[t]);
        }
        nlohmann::ordered_json years = nlohmann::ordered_json::array();
        for (const auto& [y, v] : by_year) {
            double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            years.push_back({{"year", y},
                             {"min", *std::min_element(v.begin(), v.end())},
                             {"mean", mean},
                             {"max", *std::max_element(v.begin(), v.end())}});
        }
        out.push_back({{"cluster", k}, {"medoid", series[c.medoids[k]].id}, {"members", members}, {"years", years}});
    }
    return out;
}

} // namespace dlmap::tsclust
