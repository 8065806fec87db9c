#include "spt/random.hpp"

namespace spt {

std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

std::seed_seq make_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::uint64_t s = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
    std::uint32_t words[8];
    for (int i = 0; i < 4; ++i) {
        const std::uint64_t v = splitmix64(s);
        words[2 * i] = static_cast<std::uint32_t>(v);
        words[2 * i + 1] = static_cast<std::uint32_t>(v >> 32);
    }
    return std::seed_seq(words, words + 8);
}

} // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
{
    auto seq = make_seed(seed, stream);
    engine_.seed(seq);
}

double Rng::uniform() { return uniform_(engine_); }

double Rng::normal() { return normal_(engine_); }

double Rng::gamma(double shape)
{
    std::gamma_distribution<double> dist(shape, 1.0);
    return dist(engine_);
}

void Rng::fill_normal(Eigen::Ref<Eigen::VectorXd> z)
{
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal_(engine_);
}

} // namespace spt
