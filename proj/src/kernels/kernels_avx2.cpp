// Compiled with -mavx2 only; dispatch guarantees these run on AVX2 hardware.

#include "joinsearch/kernels.hpp"

#include <immintrin.h>

#include <bit>
#include <limits>

namespace joinsearch::kernels::avx2 {

void scale(double *values, const double *factors, std::size_t n) {
	std::size_t i = 0;
	for (; i + 4 <= n; i += 4) {
		__m256d v = _mm256_loadu_pd(values + i);
		__m256d f = _mm256_loadu_pd(factors + i);
		_mm256_storeu_pd(values + i, _mm256_mul_pd(v, f));
	}
	for (; i < n; i++) {
		values[i] = values[i] * factors[i];
	}
}

static inline __m256d lane_mask(std::uint64_t mask, std::size_t i) {
	const auto bits = static_cast<long long>((mask >> i) & 0xF);
	const __m256i shifts = _mm256_set_epi64x(3, 2, 1, 0);
	__m256i m = _mm256_srlv_epi64(_mm256_set1_epi64x(bits), shifts);
	m = _mm256_and_si256(m, _mm256_set1_epi64x(1));
	m = _mm256_cmpeq_epi64(m, _mm256_set1_epi64x(1));
	return _mm256_castsi256_pd(m);
}

std::size_t masked_argmin(const double *values, std::uint64_t mask, std::size_t n) {
	if (n < 64) {
		mask &= (std::uint64_t(1) << n) - 1;
	}
	if (mask == 0) {
		return NPOS;
	}
	const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
	__m256d best = inf;
	std::size_t i = 0;
	for (; i + 4 <= n; i += 4) {
		__m256d v = _mm256_blendv_pd(inf, _mm256_loadu_pd(values + i), lane_mask(mask, i));
		best = _mm256_min_pd(best, v);
	}
	alignas(32) double lanes[4];
	_mm256_store_pd(lanes, best);
	double minimum = lanes[0];
	for (int k = 1; k < 4; k++) {
		minimum = lanes[k] < minimum ? lanes[k] : minimum;
	}
	for (; i < n; i++) {
		if ((mask >> i & 1) && values[i] < minimum) {
			minimum = values[i];
		}
	}
	// first selected lane equal to the minimum
	const __m256d target = _mm256_set1_pd(minimum);
	for (i = 0; i + 4 <= n; i += 4) {
		__m256d eq = _mm256_cmp_pd(_mm256_loadu_pd(values + i), target, _CMP_EQ_OQ);
		eq = _mm256_and_pd(eq, lane_mask(mask, i));
		auto bits = static_cast<unsigned>(_mm256_movemask_pd(eq));
		if (bits) {
			return i + static_cast<std::size_t>(std::countr_zero(bits));
		}
	}
	for (; i < n; i++) {
		if ((mask >> i & 1) && values[i] == minimum) {
			return i;
		}
	}
	// all selected values are NaN or +inf beyond the compare; fall back to the first selected
	return static_cast<std::size_t>(std::countr_zero(mask));
}

void uct_mean(const double *mean, const double *visits, std::size_t n, double log_parent, double c, double *out) {
	const double twice_log = 2.0 * log_parent;
	const __m256d tl = _mm256_set1_pd(twice_log);
	const __m256d cc = _mm256_set1_pd(c);
	std::size_t i = 0;
	for (; i + 4 <= n; i += 4) {
		__m256d ratio = _mm256_div_pd(tl, _mm256_loadu_pd(visits + i));
		__m256d bonus = _mm256_mul_pd(cc, _mm256_sqrt_pd(ratio));
		_mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(mean + i), bonus));
	}
	generic::uct_mean(mean + i, visits + i, n - i, log_parent, c, out + i);
}

void uct_extreme(const double *best, const double *visits, std::size_t n, double log_parent, double c, double gamma,
                 double *out) {
	if (gamma != 0.5 && gamma != 1.0) {
		// no vector pow; the scalar path defines the result
		generic::uct_extreme(best, visits, n, log_parent, c, gamma, out);
		return;
	}
	const __m256d lp = _mm256_set1_pd(log_parent);
	const __m256d weight = _mm256_set1_pd(2.0 * c);
	std::size_t i = 0;
	for (; i + 4 <= n; i += 4) {
		__m256d ratio = _mm256_div_pd(lp, _mm256_loadu_pd(visits + i));
		__m256d bonus = gamma == 0.5 ? _mm256_sqrt_pd(ratio) : ratio;
		_mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(best + i), _mm256_mul_pd(weight, bonus)));
	}
	generic::uct_extreme(best + i, visits + i, n - i, log_parent, c, gamma, out + i);
}

} // namespace joinsearch::kernels::avx2
