#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tgan {

// Error taxonomy shared by every module. The CLI maps these onto exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/matrix dimensions do not agree.
struct ShapeError : Error {
    using Error::Error;
};

// Value outside the mathematical domain of an operation (log of a
// non-positive number, sigma <= 0, out-of-range label, ...).
struct DomainError : Error {
    using Error::Error;
};

// API misuse: a precondition that is about call structure rather than
// values (non-scalar loss, pi row off the simplex, ...).
struct ContractError : Error {
    using Error::Error;
};

// NaN/Inf surfaced at an op boundary, or a non-finite training loss.
struct NumericError : Error {
    using Error::Error;
};

// Malformed file artifact (IDX blob, checkpoint).
struct FormatError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Deterministic random stream: xoshiro256++ seeded through splitmix64.
// Identical seeds give identical sequences on every platform, and split()
// derives independent child streams from the parent's seed alone, so the
// stream layout of a run does not depend on how many draws were made.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // Uniform on the open interval (0,1); never returns an endpoint.
    double uniform01();
    // Standard normal via the Marsaglia polar method.
    double normal();
    // Independent child stream identified by `stream`.
    Rng split(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }

  private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// FNV-1a over raw bytes; used for parameter digests in reports.
std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t h = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t v);

}  // namespace tgan
