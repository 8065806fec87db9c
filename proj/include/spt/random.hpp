#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace spt {

std::uint64_t splitmix64(std::uint64_t& state);

/// Seeded 64-bit generator. Independent streams are addressed by (seed, stream id),
/// so work partitioned into numbered chunks reproduces regardless of thread count.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    double uniform();
    double normal();
    double gamma(double shape);
    void fill_normal(Eigen::Ref<Eigen::VectorXd> z);
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

} // namespace spt
