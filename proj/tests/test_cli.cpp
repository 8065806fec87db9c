#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>
#include <sys/wait.h>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
};

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("spt_cli_test_" + std::to_string(::getpid())) / name;
    fs::create_directories(p);
    return p;
}

Run run(const std::string& args)
{
    const fs::path log = scratch("logs") / "last.txt";
    const std::string cmd = std::string(SPT_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WEXITSTATUS(status), ss.str()};
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text)
{
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Csv {
    json meta;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int col(const std::string& name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

Csv read_csv(const fs::path& p)
{
    Csv c;
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    REQUIRE(line.rfind("# ", 0) == 0);
    c.meta = json::parse(line.substr(2));
    std::getline(in, line);
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) c.header.push_back(cell);
    while (std::getline(in, line)) {
        std::stringstream rs(line);
        std::vector<double> row;
        while (std::getline(rs, cell, ',')) row.push_back(std::stod(cell));
        c.rows.push_back(row);
    }
    return c;
}

const char* kPairModel = R"({"preset":"dirichlet","d":2,"a":3,"sigma2":0.1})";

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("weights table for the two-asset Dirichlet model")
    {
        const auto dir = scratch("weights");
        const auto model = write_file(dir, "m.json", kPairModel);
        const auto r = run("weights --model " + model.string() + " --grid 101 --out " + dir.string());
        REQUIRE(r.code == 0);
        const auto csv = read_csv(dir / "weights.csv");
        CHECK(csv.rows.size() == 101);
        CHECK(csv.meta.contains("config_hash"));
        CHECK(csv.meta.at("seed") == 1);
        const int x = csv.col("x1"), u = csv.col("unconstrained_pi1"), l = csv.col("long_only_pi1");
        REQUIRE(x >= 0);
        REQUIRE(u >= 0);
        REQUIRE(l >= 0);
        for (const auto& row : csv.rows) {
            CHECK(row[u] == doctest::Approx(0.5 * (3.0 - 4.0 * row[x])).epsilon(1e-12));
            CHECK(row[l] == doctest::Approx(std::clamp(0.5 * (3.0 - 4.0 * row[x]), 0.0, 1.0)).epsilon(1e-9));
        }
    }

    TEST_CASE("market weights are the market weights")
    {
        const auto dir = scratch("market");
        const auto model = write_file(dir, "m.json", R"({"preset":"dirichlet","a":[2,3,4],"sigma2":0.1})");
        REQUIRE(run("weights --model " + model.string() + " --portfolio market --grid 50 --out " + dir.string()).code == 0);
        const auto csv = read_csv(dir / "weights.csv");
        CHECK(csv.rows.size() == 50);
        for (const auto& row : csv.rows)
            for (int i = 1; i <= 3; ++i) CHECK(row[csv.col("pi" + std::to_string(i))] == row[csv.col("x" + std::to_string(i))]);
    }

    TEST_CASE("malformed model files")
    {
        const auto dir = scratch("bad");
        auto r = run("weights --model " + write_file(dir, "a.json", R"({"preset":"dirichlet","d":2,"a":3,"sigma2":0.1,"sigmaa":1})").string() +
                     " --out " + dir.string());
        CHECK(r.code == 2);
        CHECK(r.out.find("sigmaa") != std::string::npos);
        r = run("weights --model " + write_file(dir, "b.json", R"({"preset":"dirichlet","d":2,"a":"x","sigma2":0.1})").string() + " --out " + dir.string());
        CHECK(r.code == 2);
        CHECK(r.out.find("'a'") != std::string::npos);
        r = run("weights --model " + write_file(dir, "c.json", "{not json").string() + " --out " + dir.string());
        CHECK(r.code == 2);
        r = run("weights --out " + dir.string());
        CHECK(r.code == 2);
        CHECK(r.out.find("model") != std::string::npos);
        r = run("weights --model " + (dir / "missing.json").string());
        CHECK(r.code == 2);
        r = run("frobnicate");
        CHECK(r.code == 2);
    }

    TEST_CASE("experiment file with flag overrides")
    {
        const auto dir = scratch("config");
        const auto model = write_file(dir, "m.json", kPairModel);
        const auto cfg = write_file(dir, "exp.json", json{{"model", model.string()}, {"grid", 7}, {"seed", 5}, {"out", dir.string()}}.dump());
        REQUIRE(run("weights --config " + cfg.string() + " --grid 9").code == 0);
        const auto csv = read_csv(dir / "weights.csv");
        CHECK(csv.rows.size() == 9);
        CHECK(csv.meta.at("seed") == 5);

        const auto bad = write_file(dir, "bad.json", json{{"model", model.string()}, {"gird", 7}}.dump());
        const auto r = run("weights --config " + bad.string());
        CHECK(r.code == 2);
        CHECK(r.out.find("gird") != std::string::npos);
        CHECK(run("weights --config " + cfg.string() + " --grid 0").code == 2);
    }

    TEST_CASE("qp bundle is reproducible and bounded")
    {
        const auto dir = scratch("qp");
        const auto model = write_file(dir, "m.json", kPairModel);
        const std::string args = "qp --model " + model.string() + " --M 25 --K 100 --N 100 --n_eval 20000 --seed 3 --out ";
        REQUIRE(run(args + (dir / "a").string()).code == 0);
        REQUIRE(run(args + (dir / "b").string() + " --threads 3").code == 0);
        CHECK(slurp(dir / "a" / "qp_bundle.json") == slurp(dir / "b" / "qp_bundle.json"));
        CHECK(slurp(dir / "a" / "qp_weights.csv") == slurp(dir / "b" / "qp_weights.csv"));
        const auto b = json::parse(slurp(dir / "a" / "qp_bundle.json"));
        for (const char* k : {"Q", "r", "mu", "fw_gap", "family", "Converged", "family_seed", "sample_seed"}) CHECK_MESSAGE(b.contains(k), k);
        const double est = b.at("lambda_E").at("estimate"), se = b.at("lambda_E").at("stderr");
        CHECK(est >= -3.0 * se);
        CHECK(est <= 0.1125 + 3.0 * se);

        // An iteration cap that stops early still exits 0 and flags the bundle.
        REQUIRE(run("qp --model " + model.string() + " --M 25 --K 100 --N 100 --n_eval 1000 --max_iter 1 --tol 1e-15 --out " + (dir / "c").string()).code == 0);
        CHECK(json::parse(slurp(dir / "c" / "qp_bundle.json")).at("Converged") == false);
    }

    TEST_CASE("simulation output")
    {
        const auto dir = scratch("sim");
        const auto model = write_file(dir, "m.json", kPairModel);
        auto r = run("simulate --model " + model.string() + " --T 0 --out " + (dir / "zero").string());
        REQUIRE(r.code == 0);
        const auto empty = read_csv(dir / "zero" / "simulate.csv");
        CHECK(empty.rows.empty());
        CHECK(empty.header.front() == "time");

        r = run("simulate --model " + model.string() + " --T 20 --dt 0.01 --stride 10 --portfolio market,unconstrained,long_only --seed 4 --out " +
                (dir / "run").string());
        REQUIRE(r.code == 0);
        const auto csv = read_csv(dir / "run" / "simulate.csv");
        CHECK(csv.rows.size() == 201);
        const int lv = csv.col("log_V_unconstrained");
        REQUIRE(lv >= 0);
        const auto growth = json::parse(slurp(dir / "run" / "growth.json"));
        const double g = growth.at("portfolios").at("unconstrained").at("growth");
        CHECK(g == doctest::Approx(csv.rows.back()[lv] / 20.0).epsilon(1e-12));
        CHECK(csv.rows.front()[lv] == 0.0);
        for (const auto& row : csv.rows) CHECK(std::abs(row[csv.col("log_V_market")]) < 1e-12);

        const auto m3 = write_file(dir, "m3.json", R"({"preset":"dirichlet","d":3,"a":3,"sigma2":0.1})");
        r = run("simulate --model " + m3.string() + " --T 1 --dt 0.01 --portfolio long_only --out " + (dir / "bad").string());
        CHECK(r.code == 2);
        CHECK(r.out.find("d = 2") != std::string::npos);
    }

    TEST_CASE("simulation with a qp bundle")
    {
        const auto dir = scratch("simqp");
        const auto model = write_file(dir, "m.json", kPairModel);
        REQUIRE(run("qp --model " + model.string() + " --M 5 --K 10 --N 100 --n_eval 1000 --out " + dir.string()).code == 0);
        const auto r = run("simulate --model " + model.string() + " --T 5 --dt 0.01 --portfolio qp --bundle " + (dir / "qp_bundle.json").string() +
                           " --out " + dir.string());
        CHECK(r.code == 0);
        CHECK(read_csv(dir / "simulate.csv").col("log_V_qp") >= 0);
    }

    TEST_CASE("capital distribution curves")
    {
        const auto dir = scratch("cap");
        REQUIRE(run("capcurve --draws 3 --out " + dir.string()).code == 0);
        const auto csv = read_csv(dir / "capcurve.csv");
        CHECK(csv.rows.size() == 3 * (500 + 5000));
        std::set<std::pair<double, double>> curves;
        for (const auto& row : csv.rows) curves.insert({row[0], row[1]});
        CHECK(curves.size() == 6);

        REQUIRE(run("capcurve --draws 1 --a 1 --d 40 --out " + (dir / "one").string()).code == 0);
        const auto one = read_csv(dir / "one" / "capcurve.csv");
        double total = 0.0;
        for (const auto& row : one.rows) total += row[one.col("mean")];
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

        REQUIRE(run("capcurve --draws 50 --a 1,2 --d 100 --seed 9 --out " + (dir / "x").string()).code == 0);
        REQUIRE(run("capcurve --draws 50 --a 1,2 --d 100 --seed 9 --out " + (dir / "y").string()).code == 0);
        CHECK(slurp(dir / "x" / "capcurve.csv") == slurp(dir / "y" / "capcurve.csv"));
        REQUIRE(run("capcurve --draws 5 --a 1 --d 10 --format json --out " + (dir / "j").string()).code == 0);
        CHECK(json::parse(slurp(dir / "j" / "capcurve.json")).at("rows").size() == 10);
    }

    TEST_CASE("diagnostics")
    {
        const auto dir = scratch("diag");
        const auto split = write_file(dir, "split.json",
                                      R"({"preset":"dirichlet","a":3,"alpha":[[0,1,0,0],[1,0,0,0],[0,0,0,1],[0,0,1,0]]})");
        auto r = run("diagnose --model " + split.string() + " --n 2000 --out " + (dir / "s").string());
        REQUIRE(r.code == 0);
        CHECK(r.out.find("disconnected {1,2},{3,4}") != std::string::npos);

        const auto good = write_file(dir, "good.json", R"({"preset":"dirichlet","d":3,"a":3,"sigma2":0.1})");
        r = run("diagnose --model " + good.string() + " --n 4000 --out " + (dir / "g").string());
        REQUIRE(r.code == 0);
        auto j = json::parse(slurp(dir / "g" / "diagnose.json"));
        CHECK(j.at("pass") == true);
        CHECK(j.at("rank_based_spec") == true);

        const auto bad = write_file(dir, "bad.json", R"({"preset":"dirichlet","d":3,"a":0.9,"sigma2":0.1})");
        r = run("diagnose --model " + bad.string() + " --n 4000 --out " + (dir / "b").string());
        REQUIRE(r.code == 0);
        j = json::parse(slurp(dir / "b" / "diagnose.json"));
        CHECK(j.at("pass") == false);
        CHECK(j.at("assumptions").at("violated_conditions").dump().find("gamma") != std::string::npos);
    }

    TEST_CASE("growth rates")
    {
        const auto dir = scratch("lambda");
        const auto model = write_file(dir, "m.json", kPairModel);
        REQUIRE(run("lambda --model " + model.string() + " --n 20000 --portfolio unconstrained,market --out " + dir.string()).code == 0);
        const auto j = json::parse(slurp(dir / "lambda.json"));
        CHECK(j.at("lambda_closed_form").get<double>() == doctest::Approx(0.1125).epsilon(1e-12));
        CHECK(j.at("portfolios").at("market").at("lambda_mc").get<double>() == 0.0);
        CHECK(j.at("lambda_long").get<double>() < 0.1125);
    }
}
