#include "joinsearch/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

namespace joinsearch::kernels {

double extreme_bonus(double ratio, double gamma) {
	if (gamma == 0.5) {
		return std::sqrt(ratio);
	}
	if (gamma == 1.0) {
		return ratio;
	}
	return std::pow(ratio, gamma);
}

namespace generic {

void scale(double *values, const double *factors, std::size_t n) {
	for (std::size_t i = 0; i < n; i++) {
		values[i] = values[i] * factors[i];
	}
}

std::size_t masked_argmin(const double *values, std::uint64_t mask, std::size_t n) {
	std::size_t best = NPOS;
	for (std::size_t i = 0; i < n; i++) {
		if ((mask >> i & 1) && (best == NPOS || values[i] < values[best])) {
			best = i;
		}
	}
	return best;
}

void uct_mean(const double *mean, const double *visits, std::size_t n, double log_parent, double c, double *out) {
	const double twice_log = 2.0 * log_parent;
	for (std::size_t i = 0; i < n; i++) {
		out[i] = mean[i] + c * std::sqrt(twice_log / visits[i]);
	}
}

void uct_extreme(const double *best, const double *visits, std::size_t n, double log_parent, double c, double gamma,
                 double *out) {
	const double weight = 2.0 * c;
	for (std::size_t i = 0; i < n; i++) {
		out[i] = best[i] + weight * extreme_bonus(log_parent / visits[i], gamma);
	}
}

} // namespace generic

const KernelTable &generic_table() {
	static const KernelTable table {"generic", generic::scale, generic::masked_argmin, generic::uct_mean,
	                                generic::uct_extreme};
	return table;
}

const KernelTable *avx2_table() {
#if defined(JOINSEARCH_HAVE_AVX2)
	static const bool supported = __builtin_cpu_supports("avx2");
	static const KernelTable table {"avx2", avx2::scale, avx2::masked_argmin, avx2::uct_mean, avx2::uct_extreme};
	return supported ? &table : nullptr;
#else
	return nullptr;
#endif
}

static const KernelTable &select_table() {
	const char *force = std::getenv("JOINSEARCH_FORCE_SCALAR");
	if (force && std::strcmp(force, "0") != 0 && *force) {
		return generic_table();
	}
	if (const auto *table = avx2_table()) {
		return *table;
	}
	return generic_table();
}

const KernelTable &active() {
	static const KernelTable &table = select_table();
	return table;
}

} // namespace joinsearch::kernels
