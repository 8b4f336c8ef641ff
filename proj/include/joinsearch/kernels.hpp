#pragma once

// Data-parallel inner loops of the search and the baselines. Each kernel has a
// scalar reference in `generic` and an AVX2 variant in `avx2`; the variants
// perform the same IEEE operations in the same order per lane, so results are
// bit-identical (the build disables FP contraction). `active()` picks one at
// runtime from CPUID; JOINSEARCH_FORCE_SCALAR=1 pins the scalar path.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace joinsearch::kernels {

constexpr std::size_t NPOS = static_cast<std::size_t>(-1);

//! values[i] *= factors[i]
using ScaleFn = void (*)(double *values, const double *factors, std::size_t n);
//! Index of the smallest values[i] with bit i set in mask (lowest index wins
//! ties); NPOS when mask selects nothing. n <= 64.
using MaskedArgminFn = std::size_t (*)(const double *values, std::uint64_t mask, std::size_t n);
//! out[i] = mean[i] + c * sqrt(2 * log_parent / visits[i])
using UctMeanFn = void (*)(const double *mean, const double *visits, std::size_t n, double log_parent, double c,
                           double *out);
//! out[i] = best[i] + (2 * c) * bonus(log_parent / visits[i], gamma)
using UctExtremeFn = void (*)(const double *best, const double *visits, std::size_t n, double log_parent, double c,
                              double gamma, double *out);

struct KernelTable {
	std::string_view name;
	ScaleFn scale;
	MaskedArgminFn masked_argmin;
	UctMeanFn uct_mean;
	UctExtremeFn uct_extreme;
};

//! Exploration bonus shape shared by all variants: sqrt for gamma = 0.5,
//! identity for gamma = 1, std::pow otherwise.
double extreme_bonus(double ratio, double gamma);

namespace generic {
void scale(double *values, const double *factors, std::size_t n);
std::size_t masked_argmin(const double *values, std::uint64_t mask, std::size_t n);
void uct_mean(const double *mean, const double *visits, std::size_t n, double log_parent, double c, double *out);
void uct_extreme(const double *best, const double *visits, std::size_t n, double log_parent, double c, double gamma,
                 double *out);
} // namespace generic

#if defined(JOINSEARCH_HAVE_AVX2)
namespace avx2 {
void scale(double *values, const double *factors, std::size_t n);
std::size_t masked_argmin(const double *values, std::uint64_t mask, std::size_t n);
void uct_mean(const double *mean, const double *visits, std::size_t n, double log_parent, double c, double *out);
void uct_extreme(const double *best, const double *visits, std::size_t n, double log_parent, double c, double gamma,
                 double *out);
} // namespace avx2
#endif

const KernelTable &generic_table();
//! Null when the AVX2 variant is not compiled in or the CPU lacks AVX2.
const KernelTable *avx2_table();
const KernelTable &active();

inline void scale(std::span<double> values, std::span<const double> factors) {
	active().scale(values.data(), factors.data(), values.size());
}

inline std::size_t masked_argmin(std::span<const double> values, std::uint64_t mask) {
	return active().masked_argmin(values.data(), mask, values.size());
}

} // namespace joinsearch::kernels
