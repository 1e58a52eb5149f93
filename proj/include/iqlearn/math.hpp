#pragma once

#include <cstdint>
#include <cstddef>

namespace iqlearn {

// Standard normal CDF, density and quantile (Wichura's PPND16 algorithm,
// accurate to ~1e-15 over (0,1)).
double norm_cdf(double z);
double norm_pdf(double z);
double norm_quantile(double p);

// FNV-1a over raw bytes; used for dataset provenance and per-history
// Monte Carlo stream derivation.
std::uint64_t fnv1a(const void* data, std::size_t len,
                    std::uint64_t h = 1469598103934665603ull);

// SplitMix64 finalizer; also usable to whiten/combine seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace iqlearn
