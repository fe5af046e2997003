#include "dlmac/errors.hpp"
#include "dlmac/matrix.hpp"
#include "dlmac/rng.hpp"

#include <cmath>
#include <numbers>

namespace dlmac {

const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::empty_output: return "empty_output";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::degenerate_data: return "degenerate_data";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::checksum: return "checksum";
    case ErrorKind::schema: return "schema";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::missing_input: return "missing_input";
    case ErrorKind::model_mismatch: return "model_mismatch";
    }
    return "unknown";
}

std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = data_[r * cols_ + c];
    return out;
}

void Matrix::append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw DimensionError("row width does not match matrix width");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t stream_id) {
    // splitmix64 over the pair gives well-separated engine seeds.
    auto mix = [](std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    };
    return Rng(mix(mix(seed) ^ (stream_id * 0xD1B54A32D192ED03ULL + 1)));
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

std::uint32_t Rng::poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::uint32_t k = 0;
    double p = std::exp(-mean);
    double cdf = p;
    const double u = uniform01();
    while (u > cdf && p > 0.0) {
        ++k;
        p *= mean / k;
        cdf += p;
    }
    return k;
}

double Rng::normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace dlmac
