#pragma once

#include <string>

#include <json.hpp>

#include "spt/model.hpp"

namespace spt {

/**
 * Model file schema (JSON object):
 *
 *   preset    "dirichlet" | "gen_vol_stab" | "logit_normal"
 *   d         number of assets (required when every parameter is a scalar)
 *
 *   dirichlet:     a, b (default 1), and either sigma2 (all f_ij equal) or alpha (d x d)
 *   gen_vol_stab:  gamma, beta, sigma2, K (constant, default 1)
 *   logit_normal:  mu, Sigma (d x d, or a scalar for a multiple of the identity),
 *                  a, b, sigma2 or alpha, proposal (optional Dirichlet proposal)
 *
 * Vector parameters accept a scalar (broadcast to d entries) or an array.
 * Errors are ConfigError with key() naming the offending entry.
 */
ModelInputs parse_model(const nlohmann::json& j);
ModelInputs load_model(const std::string& path);

nlohmann::json model_summary(const ModelInputs& m);

} // namespace spt
