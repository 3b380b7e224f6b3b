#pragma once

// Skip-gram with negative sampling over prepared token streams.

#include "dlmap/common.hpp"
#include "dlmap/corpus.hpp"
#include "dlmap/rng.hpp"

#include <atomic>
#include <bit>
#include <cstring>
#include <span>

namespace dlmap::embed {

struct TrainingConfig {
    std::size_t dim = 512;
    std::size_t window = 7;
    std::size_t negatives = 15;
    std::size_t epochs = 30;
    double learning_rate = 0.025;
    std::uint64_t seed = 1;
    // Frequent-word downsampling threshold; 0 disables it.
    double subsample = 0.0;
    // 1 = deterministic single updater; >1 = lock-free shared updates.
    unsigned threads = 1;

    void validate() const {
        require(dim >= 1, "embedding dim must be >= 1");
        require(window >= 1, "context window must be >= 1");
        require(negatives >= 1, "negative samples must be >= 1");
        require(epochs >= 1, "epochs must be >= 1");
        require(learning_rate > 0.0, "learning rate must be positive");
        require(subsample >= 0.0, "subsample threshold must be >= 0");
        require(threads >= 1, "threads must be >= 1");
    }

    bool operator==(const TrainingConfig&) const = default;
};

// Unigram distribution raised to the 3/4 power.
class NegativeSampler {
public:
    explicit NegativeSampler(const std::vector<std::uint64_t>& counts, double power = 0.75) {
        require(!counts.empty(), "negative sampler needs a non-empty vocabulary");
        prob_.resize(counts.size());
        double total = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            prob_[i] = std::pow(static_cast<double>(counts[i]), power);
            total += prob_[i];
        }
        require(total > 0.0, "negative sampler needs a positive count");
        cdf_.resize(counts.size());
        double run = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            prob_[i] /= total;
            run += prob_[i];
            cdf_[i] = run;
        }
        cdf_.back() = 1.0;
    }

    explicit NegativeSampler(const corpus::Vocabulary& v) : NegativeSampler(v.counts()) {}

    std::size_t size() const { return prob_.size(); }
    double probability(std::size_t i) const { return prob_.at(i); }
    const std::vector<double>& cdf() const { return cdf_; }

    std::size_t sample(Rng& rng) const {
        double u = rng.uniform();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    }

private:
    std::vector<double> prob_;
    std::vector<double> cdf_;
};

template <typename Real>
struct BasicEmbeddingModel {
    corpus::Vocabulary vocab;
    std::size_t dim = 0;
    std::vector<Real> input;  // V x D, row-major word vectors
    std::vector<Real> output; // V x D, row-major context vectors
    TrainingConfig config;

    std::size_t size() const { return vocab.size(); }

    std::span<Real> input_row(std::size_t i) { return {input.data() + i * dim, dim}; }
    std::span<const Real> input_row(std::size_t i) const { return {input.data() + i * dim, dim}; }
    std::span<Real> output_row(std::size_t i) { return {output.data() + i * dim, dim}; }
    std::span<const Real> output_row(std::size_t i) const { return {output.data() + i * dim, dim}; }

    bool operator==(const BasicEmbeddingModel&) const = default;
};

using EmbeddingModel = BasicEmbeddingModel<float>;

// Input rows uniform in [-0.5/D, 0.5/D], output rows zero.
template <typename Real>
BasicEmbeddingModel<Real> init_model(corpus::Vocabulary vocab, const TrainingConfig& cfg) {
    BasicEmbeddingModel<Real> m;
    m.vocab = std::move(vocab);
    m.dim = cfg.dim;
    m.config = cfg;
    m.input.resize(m.vocab.size() * cfg.dim);
    m.output.assign(m.vocab.size() * cfg.dim, Real(0));
    Rng rng(derive_seed(cfg.seed, "embed.init"));
    const double half = 0.5 / static_cast<double>(cfg.dim);
    for (auto& x : m.input)
        x = static_cast<Real>(rng.uniform(-half, half));
    return m;
}

inline double sigmoid(double x) {
    if (x >= 0)
        return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) {
    return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

template <typename Real>
double dot(std::span<const Real> a, std::span<const Real> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

template <typename Real>
struct PairGradient {
    double loss = 0.0;
    std::vector<double> center; // d loss / d input[center]
    // d loss / d output[index]; one entry per distinct touched row, in first-
    // touch order (context first).
    std::vector<std::pair<std::size_t, std::vector<double>>> outputs;
};

// loss = -log s(u_ctx . v) - sum_neg log s(-u_neg . v), v = input[center].
template <typename Real>
PairGradient<Real> pair_objective(std::size_t center, std::size_t context,
                                  std::span<const std::size_t> negatives,
                                  const BasicEmbeddingModel<Real>& model) {
    const std::size_t n = model.size();
    require(center < n && context < n, "pair_objective index out of range");
    PairGradient<Real> g;
    g.center.assign(model.dim, 0.0);
    auto v = model.input_row(center);
    auto touch = [&](std::size_t idx) -> std::vector<double>& {
        for (auto& [i, vec] : g.outputs)
            if (i == idx)
                return vec;
        g.outputs.emplace_back(idx, std::vector<double>(model.dim, 0.0));
        return g.outputs.back().second;
    };
    auto term = [&](std::size_t idx, double label) {
        auto u = model.output_row(idx);
        double f = dot<Real>(u, v);
        // label 1: -log s(f), label 0: -log s(-f); coefficient = s(f) - label
        g.loss -= label > 0 ? log_sigmoid(f) : log_sigmoid(-f);
        double coef = sigmoid(f) - label;
        auto& gu = touch(idx);
        for (std::size_t d = 0; d < model.dim; ++d) {
            g.center[d] += coef * static_cast<double>(u[d]);
            gu[d] += coef * static_cast<double>(v[d]);
        }
    };
    term(context, 1.0);
    for (auto neg : negatives) {
        require(neg < n, "negative index out of range");
        term(neg, 0.0);
    }
    return g;
}

struct TrainingLog {
    std::vector<double> epoch_mean_loss;     // mean pair loss per epoch
    std::vector<double> epoch_smoothed_loss; // EMA of pair loss at epoch end
    std::uint64_t pairs = 0;
};

namespace detail {

template <bool Shared, typename Real>
inline Real load(const Real* p) {
    if constexpr (Shared)
        return std::atomic_ref<Real>(*const_cast<Real*>(p)).load(std::memory_order_relaxed);
    else
        return *p;
}

template <bool Shared, typename Real>
inline void store(Real* p, Real v) {
    if constexpr (Shared)
        std::atomic_ref<Real>(*p).store(v, std::memory_order_relaxed);
    else
        *p = v;
}

struct Scratch {
    std::vector<double> center;
    std::vector<double> accum;
    std::vector<double> target;
};

// One SGD step on (center, context) plus k negatives. Returns the pair loss.
template <bool Shared, typename Real>
double sgd_pair(BasicEmbeddingModel<Real>& m, std::size_t center, std::size_t context,
                const NegativeSampler& sampler, std::size_t k, double alpha, Rng& rng,
                Scratch& s) {
    const std::size_t dim = m.dim;
    Real* v = m.input.data() + center * dim;
    s.center.resize(dim);
    s.accum.assign(dim, 0.0);
    s.target.resize(dim);
    for (std::size_t d = 0; d < dim; ++d)
        s.center[d] = static_cast<double>(load<Shared>(v + d));
    double loss = 0.0;
    for (std::size_t j = 0; j <= k; ++j) {
        std::size_t target = context;
        double label = 1.0;
        if (j > 0) {
            target = sampler.sample(rng);
            if (target == context)
                continue;
            label = 0.0;
        }
        Real* u = m.output.data() + target * dim;
        double f = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            s.target[d] = static_cast<double>(load<Shared>(u + d));
            f += s.target[d] * s.center[d];
        }
        loss -= label > 0 ? log_sigmoid(f) : log_sigmoid(-f);
        double g = (label - sigmoid(f)) * alpha;
        for (std::size_t d = 0; d < dim; ++d) {
            s.accum[d] += g * s.target[d];
            store<Shared>(u + d, static_cast<Real>(s.target[d] + g * s.center[d]));
        }
    }
    for (std::size_t d = 0; d < dim; ++d)
        store<Shared>(v + d, static_cast<Real>(s.center[d] + s.accum[d]));
    return loss;
}

struct Progress {
    std::atomic<std::uint64_t> processed{0};
    std::uint64_t scheduled = 1;
};

template <bool Shared, typename Real>
void train_range(BasicEmbeddingModel<Real>& m, const std::vector<std::vector<std::size_t>>& docs,
                 std::size_t first, std::size_t stride, const NegativeSampler& sampler,
                 const std::vector<double>& keep_prob, Progress& progress, Rng& rng,
                 std::size_t epoch, CompensatedSum& loss_sum, std::uint64_t& pairs,
                 double& smoothed, bool& smoothed_init) {
    const auto& cfg = m.config;
    Scratch scratch;
    std::vector<std::size_t> sent;
    for (std::size_t di = first; di < docs.size(); di += stride) {
        const auto& doc = docs[di];
        sent.clear();
        for (auto w : doc)
            if (keep_prob.empty() || keep_prob[w] >= 1.0 || rng.uniform() < keep_prob[w])
                sent.push_back(w);
        std::uint64_t done = progress.processed.fetch_add(doc.size(), std::memory_order_relaxed);
        double frac = static_cast<double>(done) / static_cast<double>(progress.scheduled);
        double alpha = cfg.learning_rate * std::max(1e-4, 1.0 - frac);
        for (std::size_t i = 0; i < sent.size(); ++i) {
            auto radius = static_cast<std::size_t>(rng.between(1, static_cast<long long>(cfg.window)));
            std::size_t lo = i >= radius ? i - radius : 0;
            std::size_t hi = std::min(sent.size() - 1, i + radius);
            for (std::size_t j = lo; j <= hi; ++j) {
                if (j == i)
                    continue;
                double l = sgd_pair<Shared>(m, sent[i], sent[j], sampler, cfg.negatives, alpha,
                                            rng, scratch);
                if (!std::isfinite(l))
                    throw Error(ErrorKind::convergence,
                                "non-finite SGNS loss in epoch " + std::to_string(epoch + 1) +
                                    " at document " + std::to_string(di) + ", position " +
                                    std::to_string(i) + " (lower the learning rate)");
                loss_sum.add(l);
                ++pairs;
                if (!smoothed_init) {
                    smoothed = l;
                    smoothed_init = true;
                } else {
                    smoothed = 0.999 * smoothed + 0.001 * l;
                }
            }
        }
    }
}

} // namespace detail

// Maps token streams onto vocabulary indices; unknown tokens are dropped.
inline std::vector<std::vector<std::size_t>> index_streams(const std::vector<corpus::TokenStream>& streams,
                                                           const corpus::Vocabulary& vocab) {
    std::vector<std::vector<std::size_t>> out;
    out.reserve(streams.size());
    for (const auto& s : streams) {
        std::vector<std::size_t> ids;
        ids.reserve(s.tokens.size());
        for (const auto& t : s.tokens)
            if (auto* e = vocab.find(t))
                ids.push_back(e->index);
        out.push_back(std::move(ids));
    }
    return out;
}

template <typename Real = float>
BasicEmbeddingModel<Real> train(const std::vector<corpus::TokenStream>& streams,
                                const corpus::Vocabulary& vocab, const TrainingConfig& cfg,
                                TrainingLog* log = nullptr) {
    cfg.validate();
    require(!vocab.empty(), "cannot train on an empty vocabulary");
    auto model = init_model<Real>(vocab, cfg);
    auto docs = index_streams(streams, vocab);
    NegativeSampler sampler(vocab);

    std::vector<double> keep_prob;
    if (cfg.subsample > 0.0) {
        keep_prob.resize(vocab.size());
        const double t = cfg.subsample * static_cast<double>(vocab.total());
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            double f = static_cast<double>(vocab.count_at(i));
            keep_prob[i] = (std::sqrt(f / t) + 1.0) * t / f;
        }
    }

    std::uint64_t tokens = 0;
    for (const auto& d : docs)
        tokens += d.size();
    detail::Progress progress;
    progress.scheduled = std::max<std::uint64_t>(1, tokens * cfg.epochs);

    TrainingLog local;
    double smoothed = 0.0;
    bool smoothed_init = false;
    Rng rng(derive_seed(cfg.seed, "embed.train"));
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        CompensatedSum loss_sum;
        std::uint64_t pairs = 0;
        if (cfg.threads <= 1) {
            detail::train_range<false>(model, docs, 0, 1, sampler, keep_prob, progress, rng, epoch,
                                       loss_sum, pairs, smoothed, smoothed_init);
        } else {
            std::vector<CompensatedSum> sums(cfg.threads);
            std::vector<std::uint64_t> counts(cfg.threads, 0);
            std::vector<double> ema(cfg.threads, 0.0);
            std::vector<char> ema_init(cfg.threads, 0);
            parallel_for(cfg.threads, cfg.threads, [&](std::size_t t) {
                Rng wrng(derive_seed(cfg.seed, "embed.worker", epoch * cfg.threads + t));
                bool init = false;
                detail::train_range<true>(model, docs, t, cfg.threads, sampler, keep_prob, progress,
                                          wrng, epoch, sums[t], counts[t], ema[t], init);
                ema_init[t] = init;
            });
            double ema_total = 0.0;
            unsigned ema_n = 0;
            for (unsigned t = 0; t < cfg.threads; ++t) {
                loss_sum.add(sums[t].value());
                pairs += counts[t];
                if (ema_init[t]) {
                    ema_total += ema[t];
                    ++ema_n;
                }
            }
            if (ema_n) {
                smoothed = ema_total / ema_n;
                smoothed_init = true;
            }
        }
        local.pairs += pairs;
        local.epoch_mean_loss.push_back(pairs ? loss_sum.value() / static_cast<double>(pairs) : 0.0);
        local.epoch_smoothed_loss.push_back(smoothed);
    }
    if (log)
        *log = std::move(local);
    return model;
}

// ---------------------------------------------------------------- queries

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j)
        prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::vector<std::string> closest_spellings(const corpus::Vocabulary& vocab,
                                                  std::string_view token, std::size_t n = 3) {
    std::vector<std::pair<std::size_t, std::string>> scored;
    for (const auto& t : vocab.tokens())
        scored.emplace_back(edit_distance(token, t), t);
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(n, scored.size()); ++i)
        out.push_back(scored[i].second);
    return out;
}

template <typename Real>
std::size_t lookup(const BasicEmbeddingModel<Real>& m, const std::string& token) {
    if (auto* e = m.vocab.find(token))
        return e->index;
    fail("unknown token '" + token + "'; closest: " + join(closest_spellings(m.vocab, token), ", "));
}

template <typename Real>
double row_cosine(std::span<const Real> a, std::span<const Real> b) {
    double ab = dot<Real>(a, b), aa = dot<Real>(a, a), bb = dot<Real>(b, b);
    if (aa == 0.0 || bb == 0.0)
        return 0.0;
    return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

template <typename Real>
double cosine(const BasicEmbeddingModel<Real>& m, const std::string& a, const std::string& b) {
    return row_cosine<Real>(m.input_row(lookup(m, a)), m.input_row(lookup(m, b)));
}

using Neighbor = std::pair<std::string, double>;

// Unit-normalized copy of the input matrix for repeated top-n queries.
class NeighborIndex {
public:
    template <typename Real>
    explicit NeighborIndex(const BasicEmbeddingModel<Real>& m) : tokens_(m.vocab.tokens()), dim_(m.dim) {
        unit_.resize(m.input.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
            auto row = m.input_row(i);
            double nn = std::sqrt(dot<Real>(row, row));
            for (std::size_t d = 0; d < dim_; ++d)
                unit_[i * dim_ + d] = nn > 0 ? static_cast<double>(row[d]) / nn : 0.0;
        }
        for (std::size_t i = 0; i < tokens_.size(); ++i)
            where_[tokens_[i]] = i;
    }

    std::vector<Neighbor> nearest(const std::string& token, std::size_t n) const {
        auto it = where_.find(token);
        require(it != where_.end(), "unknown token '" + token + "'");
        if (n == 0)
            return {};
        const std::size_t q = it->second;
        std::vector<std::pair<double, std::size_t>> scored;
        scored.reserve(tokens_.size());
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            if (i == q)
                continue;
            double s = 0.0;
            for (std::size_t d = 0; d < dim_; ++d)
                s += unit_[q * dim_ + d] * unit_[i * dim_ + d];
            scored.emplace_back(std::clamp(s, -1.0, 1.0), i);
        }
        auto better = [&](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : tokens_[a.second] < tokens_[b.second];
        };
        auto k = std::min(n, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);
        std::vector<Neighbor> out;
        for (std::size_t i = 0; i < k; ++i)
            out.emplace_back(tokens_[scored[i].second], scored[i].first);
        return out;
    }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> where_;
    std::size_t dim_;
    std::vector<double> unit_;
};

// Top-n by cosine over input vectors, query excluded; ties by token order.
template <typename Real>
std::vector<Neighbor> nearest(const BasicEmbeddingModel<Real>& m, const std::string& token, std::size_t n) {
    lookup(m, token);
    return NeighborIndex(m).nearest(token, n);
}

// ---------------------------------------------------------------- files

// Layout: "DLMAPEMB" | u32 version | u64 V | u64 D | config echo | input
// floats | output floats. All integers and floats little-endian.
inline constexpr char model_magic[8] = {'D', 'L', 'M', 'A', 'P', 'E', 'M', 'B'};
inline constexpr std::uint32_t model_version = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    U bits = std::bit_cast<U>(v);
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i)
        buf[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename T>
T get_le(std::istream& in) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    unsigned char buf[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(U)))
        fail("truncated model file");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        bits |= static_cast<U>(buf[i]) << (8 * i);
    return std::bit_cast<T>(bits);
}

} // namespace detail

inline void save_model(const std::string& path, const EmbeddingModel& m) {
    auto out = open_output(path);
    out.write(model_magic, sizeof(model_magic));
    detail::put_le<std::uint32_t>(out, model_version);
    detail::put_le<std::uint64_t>(out, m.size());
    detail::put_le<std::uint64_t>(out, m.dim);
    const auto& c = m.config;
    detail::put_le<std::uint64_t>(out, c.window);
    detail::put_le<std::uint64_t>(out, c.negatives);
    detail::put_le<std::uint64_t>(out, c.epochs);
    detail::put_le<double>(out, c.learning_rate);
    detail::put_le<std::uint64_t>(out, c.seed);
    detail::put_le<double>(out, c.subsample);
    detail::put_le<std::uint32_t>(out, c.threads);
    for (float x : m.input)
        detail::put_le<float>(out, x);
    for (float x : m.output)
        detail::put_le<float>(out, x);
    auto side = open_output(path + ".vocab");
    for (const auto& t : m.vocab.tokens())
        side << t << '\n';
}

// Counts are not part of the model file; pass the corpus vocabulary to
// restore them, otherwise they load as zero.
inline EmbeddingModel load_model(const std::string& path, const corpus::Vocabulary* counts = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail("cannot open model " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, model_magic, 8) != 0)
        fail(path + ": not a dlmap embedding model");
    auto version = detail::get_le<std::uint32_t>(in);
    require(version == model_version, path + ": unsupported model version " + std::to_string(version));
    EmbeddingModel m;
    auto v = detail::get_le<std::uint64_t>(in);
    m.dim = detail::get_le<std::uint64_t>(in);
    auto& c = m.config;
    c.dim = m.dim;
    c.window = detail::get_le<std::uint64_t>(in);
    c.negatives = detail::get_le<std::uint64_t>(in);
    c.epochs = detail::get_le<std::uint64_t>(in);
    c.learning_rate = detail::get_le<double>(in);
    c.seed = detail::get_le<std::uint64_t>(in);
    c.subsample = detail::get_le<double>(in);
    c.threads = detail::get_le<std::uint32_t>(in);
    m.input.resize(v * m.dim);
    m.output.resize(v * m.dim);
    for (auto& x : m.input)
        x = detail::get_le<float>(in);
    for (auto& x : m.output)
        x = detail::get_le<float>(in);
    auto tokens = read_lines(path + ".vocab");
    require(tokens.size() == v, path + ".vocab: expected " + std::to_string(v) + " tokens");
    for (const auto& t : tokens)
        m.vocab.add(t, counts ? counts->count(t) : 0);
    return m;
}

} // namespace dlmap::embed
