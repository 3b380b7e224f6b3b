#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace dlmap {

// Error categories double as CLI exit codes.
enum class ErrorKind : int {
    validation = 2,
    convergence = 3,
    prerequisite = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& what) {
    throw Error(ErrorKind::validation, what);
}

inline void require(bool cond, const std::string& what) {
    if (!cond)
        fail(what);
}

// ---------------------------------------------------------------- strings

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            return out;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

template <typename Range>
std::string join(const Range& parts, std::string_view sep) {
    std::string out;
    bool first = true;
    for (const auto& p : parts) {
        if (!first)
            out += sep;
        out += p;
        first = false;
    }
    return out;
}

// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
    if (std::isnan(v))
        return "NA";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline double parse_double(std::string_view s, std::string_view what) {
    std::string tmp(trim(s));
    try {
        std::size_t used = 0;
        double v = std::stod(tmp, &used);
        if (used != tmp.size())
            throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        fail("cannot parse number '" + tmp + "' for " + std::string(what));
    }
}

inline long long parse_int(std::string_view s, std::string_view what) {
    std::string tmp(trim(s));
    try {
        std::size_t used = 0;
        long long v = std::stoll(tmp, &used);
        if (used != tmp.size())
            throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        fail("cannot parse integer '" + tmp + "' for " + std::string(what));
    }
}

// ---------------------------------------------------------------- files

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        fail("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

// Reads a one-entry-per-line list; '#' starts a comment, blank lines skipped.
inline std::vector<std::string> read_word_list(const std::string& path) {
    std::vector<std::string> out;
    for (const auto& raw : read_lines(path)) {
        auto line = trim(raw.substr(0, raw.find('#')));
        if (!line.empty())
            out.emplace_back(line);
    }
    return out;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail("cannot write " + path);
    return out;
}

// ---------------------------------------------------------------- numerics

// Neumaier compensated summation.
class CompensatedSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Linear-interpolation quantile of an already sorted sample (the "type 7"
// definition: position (n-1)p).
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
    require(!sorted.empty(), "quantile of empty sample");
    if (sorted.size() == 1)
        return sorted.front();
    double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    auto lo = static_cast<std::size_t>(std::floor(h));
    auto hi = std::min(lo + 1, sorted.size() - 1);
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return sorted_quantile(values, p);
}

// ---------------------------------------------------------------- threads

inline unsigned default_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1u : n;
}

// Runs fn(i) for i in [0, n). Work items are independent; callers write
// results by index so the outcome does not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    auto count = std::min<std::size_t>(threads, n);
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace dlmap
