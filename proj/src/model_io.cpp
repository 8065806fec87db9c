#include "spt/model_io.hpp"

#include <fstream>
#include <set>

#include "spt/errors.hpp"

namespace spt {

using nlohmann::json;

namespace {

const json& require_key(const json& j, const std::string& key)
{
    if (!j.contains(key)) throw ConfigError(key, "missing required key");
    return j.at(key);
}

double number(const json& v, const std::string& key)
{
    if (!v.is_number()) throw ConfigError(key, "expected a number");
    return v.get<double>();
}

int infer_dim(const json& j, std::initializer_list<const char*> vector_keys)
{
    if (j.contains("d")) {
        const json& v = j.at("d");
        if (!v.is_number_integer() || v.get<long long>() < 2) throw ConfigError("d", "expected an integer >= 2");
        return static_cast<int>(v.get<long long>());
    }
    for (const char* k : vector_keys)
        if (j.contains(k) && j.at(k).is_array()) return static_cast<int>(j.at(k).size());
    throw ConfigError("d", "dimension not given and no vector parameter to infer it from");
}

Vec vector_param(const json& j, const std::string& key, int d, std::optional<double> fallback = std::nullopt)
{
    if (!j.contains(key)) {
        if (fallback) return Vec::Constant(d, *fallback);
        throw ConfigError(key, "missing required key");
    }
    const json& v = j.at(key);
    if (v.is_number()) return Vec::Constant(d, v.get<double>());
    if (!v.is_array()) throw ConfigError(key, "expected a number or an array");
    if (static_cast<int>(v.size()) != d)
        throw ConfigError(key, "expected " + std::to_string(d) + " entries, got " + std::to_string(v.size()));
    Vec out(d);
    for (int i = 0; i < d; ++i) out[i] = number(v[i], key + "[" + std::to_string(i) + "]");
    return out;
}

Mat matrix_param(const json& v, const std::string& key, int d)
{
    if (!v.is_array() || static_cast<int>(v.size()) != d) throw ConfigError(key, "expected a " + std::to_string(d) + "x" + std::to_string(d) + " array");
    Mat out(d, d);
    for (int i = 0; i < d; ++i) {
        const json& row = v[i];
        if (!row.is_array() || static_cast<int>(row.size()) != d)
            throw ConfigError(key + "[" + std::to_string(i) + "]", "expected " + std::to_string(d) + " entries");
        for (int k = 0; k < d; ++k) out(i, k) = number(row[k], key + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
    }
    return out;
}

Mat pair_constants(const json& j, int d)
{
    if (j.contains("alpha")) return matrix_param(j.at("alpha"), "alpha", d);
    const double s2 = number(require_key(j, "sigma2"), "sigma2");
    if (!(s2 > 0.0)) throw ConfigError("sigma2", "must be positive");
    Mat a = Mat::Constant(d, d, s2);
    a.diagonal().setZero();
    return a;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed)
{
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(it.key(), "unknown key");
}

template <class Fn>
ModelInputs rethrow_as_config(const std::string& key, Fn&& fn)
{
    try {
        return fn();
    } catch (const InvalidParameter& e) {
        throw ConfigError(key, e.what());
    }
}

} // namespace

ModelInputs parse_model(const json& j)
{
    if (!j.is_object()) throw ConfigError("", "model file must contain a JSON object");
    const json& preset = require_key(j, "preset");
    if (!preset.is_string()) throw ConfigError("preset", "expected a string");
    const std::string name = preset.get<std::string>();

    if (name == "dirichlet") {
        reject_unknown(j, {"preset", "d", "a", "b", "sigma2", "alpha"});
        const int d = infer_dim(j, {"a", "b", "alpha"});
        DirichletParams p;
        p.a = vector_param(j, "a", d);
        p.b = vector_param(j, "b", d, 1.0);
        p.alpha = pair_constants(j, d);
        for (int i = 0; i < d; ++i) {
            if (!(p.a[i] > 0.0)) throw ConfigError("a", "entries must be positive");
            if (!(p.b[i] >= 1.0)) throw ConfigError("b", "entries must be at least 1");
        }
        return rethrow_as_config(j.contains("alpha") ? "alpha" : "sigma2", [&] { return make_dirichlet(p); });
    }
    if (name == "gen_vol_stab") {
        reject_unknown(j, {"preset", "d", "gamma", "beta", "sigma2", "K"});
        const int d = infer_dim(j, {"gamma"});
        GenVolStabParams p;
        p.gamma = vector_param(j, "gamma", d);
        p.beta = number(require_key(j, "beta"), "beta");
        if (!(p.beta > 0.0)) throw ConfigError("beta", "must be positive");
        p.sigma2 = number(require_key(j, "sigma2"), "sigma2");
        if (!(p.sigma2 > 0.0)) throw ConfigError("sigma2", "must be positive");
        if (j.contains("K")) {
            const double k = number(j.at("K"), "K");
            if (!(k > 0.0)) throw ConfigError("K", "must be positive");
            p.k_tilde = [k](const Vec&) { return k; };
            p.k_min = p.k_max = k;
        }
        return rethrow_as_config("gamma", [&] { return make_gen_vol_stab(p); });
    }
    if (name == "logit_normal") {
        reject_unknown(j, {"preset", "d", "mu", "Sigma", "a", "b", "sigma2", "alpha", "proposal"});
        const int d = infer_dim(j, {"mu", "a", "b", "Sigma"});
        LogitNormalParams p;
        p.mu = vector_param(j, "mu", d, 0.0);
        const json& s = require_key(j, "Sigma");
        p.sigma = s.is_number() ? Mat(s.get<double>() * Mat::Identity(d, d)) : matrix_param(s, "Sigma", d);
        p.a = vector_param(j, "a", d);
        p.b = vector_param(j, "b", d);
        p.alpha = pair_constants(j, d);
        std::optional<Vec> proposal;
        if (j.contains("proposal")) {
            proposal = vector_param(j, "proposal", d);
            if ((proposal->array() <= 0.0).any()) throw ConfigError("proposal", "entries must be positive");
        }
        try {
            return make_logit_normal(p, proposal);
        } catch (const InvalidParameter& e) {
            const std::string what = e.what();
            throw ConfigError(what.find("Sigma") != std::string::npos ? "Sigma" : (what.find("alpha") != std::string::npos ? "alpha" : "a"), what);
        }
    }
    throw ConfigError("preset", "unknown preset '" + name + "' (expected dirichlet, gen_vol_stab or logit_normal)");
}

ModelInputs load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("model", "cannot open model file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("model", std::string("invalid JSON: ") + e.what());
    }
    return parse_model(j);
}

json model_summary(const ModelInputs& m)
{
    json j;
    j["name"] = m.name;
    j["d"] = m.dim;
    auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    if (const auto* p = std::get_if<DirichletParams>(&m.preset)) {
        j["a"] = vec(p->a);
        j["b"] = vec(p->b);
        j["gamma"] = vec(p->gamma());
    } else if (const auto* p = std::get_if<GenVolStabParams>(&m.preset)) {
        j["gamma"] = vec(p->gamma);
        j["beta"] = p->beta;
        j["sigma2"] = p->sigma2;
    } else if (const auto* p = std::get_if<LogitNormalParams>(&m.preset)) {
        j["mu"] = vec(p->mu);
        j["a"] = vec(p->a);
        j["b"] = vec(p->b);
    }
    return j;
}

} // namespace spt
