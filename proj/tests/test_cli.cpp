#include "kerbound/io.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

using namespace kerbound;
namespace fs = std::filesystem;
using io::json;

namespace {

const fs::path kRoot = KERBOUND_SCRATCH;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the CLI with `args` (already shell-quoted where needed).
Run cli(const std::string& args) {
  fs::create_directories(kRoot);
  const fs::path out = kRoot / "stdout.txt", err = kRoot / "stderr.txt";
  const std::string cmd = std::string("\"") + KERBOUND_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = io::read_file(out);
  r.err = io::read_file(err);
  return r;
}

fs::path fresh(const std::string& name) {
  const fs::path dir = kRoot / name;
  fs::remove_all(dir);
  return dir;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

void put(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

FeasibleSetCollection make(Index d1, Index d2, std::vector<Matrix> sets) {
  FeasibleSetCollection c;
  c.d1 = d1;
  c.d2 = d2;
  for (std::size_t k = 0; k < sets.size(); ++k)
    c.entries.push_back({std::to_string(k), Vector::Constant(d2, static_cast<double>(k)), sets[k]});
  return c;
}

Matrix two_point() { return (Matrix(2, 2) << 0, 0, 0, 2).finished(); }

bool same_tree(const fs::path& a, const fs::path& b) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++n;
    const fs::path other = b / e.path().filename();
    if (!fs::exists(other) || io::read_file(e.path()) != io::read_file(other)) return false;
  }
  return n == static_cast<std::size_t>(std::distance(fs::directory_iterator(b), fs::directory_iterator{}));
}

}  // namespace

TEST_CASE("sample is reproducible") {
  const fs::path cfg = kRoot / "toy.json";
  put(cfg, json{{"model", {{"type", "linear_additive"}, {"matrix", {{0.5, 0.5, 0.0}, {0.0, 1.0, -1.0}}},
                           {"noise", {{"kind", "additive"}, {"eps_additive", 0.1}}}}},
                {"sampler", {{"kind", "rejection"}, {"n_max", 20}, {"budget", 20000}}},
                {"measurements", {{"generate", {{"count", 4}}}}}}
                   .dump());
  const fs::path a = fresh("sample_a"), b = fresh("sample_b"), c = fresh("sample_c");
  const Run ra = cli("sample --config " + q(cfg) + " --out " + q(a) + " --seed 7");
  REQUIRE(ra.code == 0);
  CHECK(ra.out.rfind("K 4\n", 0) == 0);
  REQUIRE(cli("sample --config " + q(cfg) + " --out " + q(b) + " --seed 7").code == 0);
  CHECK(same_tree(a, b));
  REQUIRE(cli("sample --config " + q(cfg) + " --out " + q(c) + " --seed 8").code == 0);
  CHECK_FALSE(same_tree(a, c));
  CHECK(io::read_collection(a).collection.size() == 4);
}

TEST_CASE("sample warns for an injective noiseless model") {
  const fs::path cfg = kRoot / "injective.json";
  put(cfg, json{{"model", {{"type", "linear_additive"}, {"matrix", {{1.0, 0.0}, {0.0, 1.0}}}}},
                {"sampler", {{"kind", "rejection"}, {"n_max", 10}, {"budget", 200}}},
                {"measurements", {{"generate", {{"count", 3}, {"seed", 1}}}}}}
                   .dump());
  const Run r = cli("sample --config " + q(cfg) + " --out " + q(fresh("injective")));
  CHECK(r.code == 0);
  CHECK(r.out.find("min 1 max 1") != std::string::npos);
  CHECK(r.err.find("warning") != std::string::npos);
}

TEST_CASE("kersize on the worked collections") {
  const fs::path one = fresh("two_point");
  io::write_collection(one, make(2, 1, {two_point()}), NormSpec::euclidean());
  Run r = cli("kersize " + q(one));
  REQUIRE(r.code == 0);
  CHECK(r.out == "kersize 1.4142135623730951\nhalf_kersize 0.7071067811865476\n");
  CHECK(fs::exists(one / "bounds.json"));
  CHECK(io::read_file(one / "per_measurement.csv") == "id,n_k,half_kersize_single\n0,2,0.7071067811865476\n");

  const fs::path two = fresh("k2");
  io::write_collection(two, make(2, 1, {two_point(), Matrix::Constant(2, 1, 1.0)}), NormSpec::euclidean());
  r = cli("kersize " + q(two) + " --p 1");
  REQUIRE(r.code == 0);
  CHECK(r.out == "kersize 0.5\nhalf_kersize 0.25\n");

  const fs::path single = fresh("singletons");
  io::write_collection(single, make(2, 1, {Matrix::Constant(2, 1, 1.0), Matrix::Constant(2, 1, 3.0)}),
                       NormSpec::euclidean());
  CHECK(cli("kersize " + q(single)).out == "kersize 0\nhalf_kersize 0\n");

  // Masking the second coordinate away removes all spread.
  CHECK(cli("kersize " + q(one) + " --mask 0").out == "kersize 0\nhalf_kersize 0\n");
}

TEST_CASE("loss through prediction files") {
  const fs::path dir = fresh("loss");
  io::write_collection(dir, make(2, 1, {two_point()}), NormSpec::euclidean());
  const fs::path mid = dir / "mid", zero = dir / "zero", exact = fresh("loss_exact");
  io::write_predictions(mid, {{"0", (Vector(2) << 0, 1).finished()}});
  io::write_predictions(zero, {{"0", Vector::Zero(2)}});
  Run r = cli("loss " + q(dir) + " " + q(mid));
  REQUIRE(r.code == 0);
  CHECK(r.out == "loss mid 1\n");
  r = cli("loss " + q(dir) + " " + q(zero) + " --p 1");
  CHECK(r.out == "loss zero 1\n");
  const json j = json::parse(io::read_file(dir / "bounds.json"));
  CHECK(j["losses"]["mid"].get<double>() == 1.0);
  CHECK(j["losses"]["zero"].get<double>() == 1.0);

  const fs::path single = fresh("loss_single");
  io::write_collection(single, make(2, 1, {Matrix::Constant(2, 1, 0.25)}), NormSpec::euclidean());
  io::write_predictions(exact, {{"0", Vector::Constant(2, 0.25)}});
  CHECK(cli("loss " + q(single) + " " + q(exact) + " --name truth").out == "loss truth 0\n");

  fs::remove(zero / "pred_0.csv");
  CHECK(cli("loss " + q(dir) + " " + q(zero)).code == 2);
}

TEST_CASE("validate exits 0 on a sampled collection and 3 on a corrupted one under --strict") {
  const fs::path cfg = kRoot / "validate.json";
  const json model = {{"type", "linear_additive"}, {"matrix", {{1.0, 1.0, 0.0}}},
                      {"noise", {{"kind", "additive"}, {"eps_additive", 0.05}}}};
  put(cfg, json{{"model", model},
                {"sampler", {{"kind", "rejection"}, {"n_max", 15}, {"budget", 50000}}},
                {"measurements", {{"generate", {{"count", 5}, {"seed", 2}}}}}}
                   .dump());
  const fs::path dir = fresh("validate");
  REQUIRE(cli("sample --config " + q(cfg) + " --out " + q(dir) + " --uniform 10").code == 0);
  Run r = cli("validate " + q(dir) + " --strict --model " + q(cfg));
  CHECK(r.code == 0);
  CHECK(io::read_file(dir / "scatter.csv").rfind("id,half_kersize_single,median_loss,theta_loss,zero_loss\n", 0) == 0);
  const json j = json::parse(io::read_file(dir / "bounds.json"));
  CHECK(j["lower_ok_all"].get<bool>());
  CHECK(j["infeasible_members"].get<int>() == 0);

  // Move one member far off its feasible set.
  auto loaded = io::read_collection(dir);
  loaded.collection.entries[0].members.col(3) = Vector::Constant(3, 0.9);
  loaded.collection.entries[0].measurement(0) = -1.5;
  io::write_collection(dir, loaded.collection, loaded.norm);
  r = cli("validate " + q(dir) + " --strict --model " + q(cfg));
  CHECK(r.code == 3);
  CHECK(r.err.find("infeasible member") != std::string::npos);
  CHECK(cli("validate " + q(dir) + " --model " + q(cfg)).code == 0);
}

TEST_CASE("validate takes external prediction directories") {
  const fs::path dir = fresh("validate_ext");
  io::write_collection(dir, make(2, 1, {two_point()}), NormSpec::euclidean());
  io::write_predictions(dir / "far", {{"0", Vector::Constant(2, 50.0)}});
  const Run r = cli("validate " + q(dir) + " " + q(dir / "far") + " --strict");
  CHECK(r.code == 0);
  CHECK(r.out.find("far loss") != std::string::npos);
}

TEST_CASE("skersize on the single-pair example") {
  const fs::path dir = fresh("skersize");
  FeasibleSetCollection c = make(2, 1, {(Matrix(2, 1) << 1, 3).finished()});
  c.entries[0].measurement(0) = 2.0;
  io::write_collection(dir, c, NormSpec::euclidean());
  put(dir / "a.csv", "0.5,0.5\n");
  const Run r = cli("skersize " + q(dir) + " --matrix " + q(dir / "a.csv"));
  REQUIRE(r.code == 0);
  CHECK(r.out == "skersize 1.4142135623730951\n");
  CHECK(io::read_file(dir / "symmetric" / "v_norms.csv") == "id,v_norm\n0,1.4142135623730951\n");
  const auto sym = io::read_collection(dir / "symmetric" / "symmetrized").collection;
  REQUIRE(sym.size() == 1);
  REQUIRE(sym.entries[0].size() == 2);
  CHECK(sym.entries[0].members(0, 1) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(sym.entries[0].members(1, 1) == doctest::Approx(1.0).epsilon(1e-14));

  // A pair in the row space has no kernel component.
  FeasibleSetCollection row = make(2, 1, {(Matrix(2, 1) << 2, 2).finished()});
  row.entries[0].measurement(0) = 2.0;
  const fs::path rdir = fresh("skersize_row");
  io::write_collection(rdir, row, NormSpec::euclidean());
  const Run zero = cli("skersize " + q(rdir) + " --matrix " + q(dir / "a.csv"));
  REQUIRE(zero.out.rfind("skersize ", 0) == 0);
  CHECK(std::stod(zero.out.substr(9)) < 1e-14);

  // An infeasible pair is a data error.
  row.entries[0].measurement(0) = 5.0;
  io::write_collection(rdir, row, NormSpec::euclidean());
  CHECK(cli("skersize " + q(rdir) + " --matrix " + q(dir / "a.csv")).code == 2);
}

TEST_CASE("exit codes for usage and data errors") {
  CHECK(cli("").code == 1);
  CHECK(cli("frobnicate").code == 1);
  CHECK(cli("kersize").code == 1);
  CHECK(cli("demo nothing --out " + q(fresh("nothing"))).code == 1);
  CHECK(cli("kersize " + q(fresh("missing"))).code == 2);

  const fs::path dir = fresh("codes");
  io::write_collection(dir, make(2, 1, {two_point()}), NormSpec::euclidean());
  CHECK(cli("kersize " + q(dir) + " --p 0").code == 1);
  CHECK(cli("kersize " + q(dir) + " --mask 5").code == 1);
  put(dir / "fs_0.csv", "0,0\n0\n");
  CHECK(cli("kersize " + q(dir)).code == 2);
  put(dir / "manifest.json", "{not json");
  CHECK(cli("kersize " + q(dir)).code == 2);
}

TEST_CASE("superres demo is reproducible") {
  const fs::path a = fresh("demo_a"), b = fresh("demo_b");
  REQUIRE(cli("demo superres --seed 3 --k 8 --out " + q(a)).code == 0);
  REQUIRE(cli("demo superres --seed 3 --k 8 --out " + q(b)).code == 0);
  CHECK(io::read_file(a / "table.csv") == io::read_file(b / "table.csv"));
  CHECK(io::read_file(a / "v_norms.csv") == io::read_file(b / "v_norms.csv"));
}

TEST_CASE("microscopy demo writes its tables") {
  const fs::path dir = fresh("demo_micro");
  const Run r = cli("demo microscopy --k 3 --n-max 40 --strict --out " + q(dir));
  CHECK(r.code == 0);
  CHECK(r.out.find("all losses are above half the kernel size") != std::string::npos);
  CHECK(fs::exists(dir / "table.csv"));
  CHECK(fs::exists(dir / "scatter.csv"));
  CHECK(fs::exists(dir / "setup_1" / "collection" / "manifest.json"));
}
