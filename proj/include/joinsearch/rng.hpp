#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace joinsearch {

//! SplitMix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
	x += 0x9e3779b97f4a7c15ULL;
	x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
	x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
	return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
	return mix64(seed ^ mix64(value));
}

//! FNV-1a; stable across platforms, unlike std::hash.
constexpr std::uint64_t hash_string(std::string_view text) {
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (char ch : text) {
		h ^= static_cast<unsigned char>(ch);
		h *= 0x100000001b3ULL;
	}
	return h;
}

//! Seedable, splittable generator. Every stochastic choice in a search draws
//! from one of these; the bounded/real draws are implemented here (not via
//! <random> distributions) so streams are identical across standard libraries.
class Rng {
public:
	explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {
	}

	std::uint64_t seed() const {
		return seed_;
	}

	//! Independent substream, a pure function of (seed, stream).
	Rng split(std::uint64_t stream) const {
		return Rng(hash_combine(seed_, stream));
	}

	std::uint64_t next_u64() {
		return engine_();
	}

	//! Uniform in [0, 1) with 53 random bits.
	double uniform01() {
		return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
	}

	//! Uniform in [0, bound); bound must be > 0.
	std::size_t uniform_index(std::size_t bound) {
		// rejection sampling removes modulo bias
		const std::uint64_t b = bound;
		const std::uint64_t limit = UINT64_MAX - UINT64_MAX % b;
		std::uint64_t x;
		do {
			x = engine_();
		} while (x >= limit);
		return static_cast<std::size_t>(x % b);
	}

	bool bernoulli(double p) {
		return uniform01() < p;
	}

private:
	std::uint64_t seed_;
	std::mt19937_64 engine_;
};

} // namespace joinsearch
