// Command-line front end: onesided <subcommand> [options]
//
// Exit codes: 0 ok, 1 acceptance failure, 2 usage or parse error, 3 I/O.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "onesided/enumeration.hpp"
#include "onesided/experiments.hpp"
#include "onesided/measures.hpp"
#include "onesided/partition.hpp"
#include "onesided/random/samplers.hpp"
#include "onesided/tree.hpp"

using namespace onesided;

namespace {

double mu_from(const std::string& s) {
  if (s == "mu0") return kMu0;
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw Error("cannot parse mu: " + s);
  return v;
}

std::string to_decimal(const BigFloat& v, int digits = 20) { return v.str(digits, std::ios_base::scientific); }

struct Output {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file.open(path);
    if (!file) throw IoError("cannot write " + path);
    os = &file;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact enumeration and sampling of one-sided planar trees"};
  app.require_subcommand(1);

  std::string what = "B", mu_s = "0", kind_s = "tau", tree_s, regime, out_path, config, csv_path;
  std::size_t m = 1, n = 1, n_min = 0, n_max = 0, r = 1, cap = 40, rmax = 16, replicas = 1;
  std::uint64_t seed = 1;
  bool closed = false, use_z = false;

  auto* count = app.add_subcommand("count", "Tree counts A (height <= m), B (one-sided, height m), omega (one-sided)");
  count->add_option("--what", what, "A, B or omega")->check(CLI::IsMember({"A", "B", "omega"}));
  count->add_option("--m", m, "height");
  count->add_option("--n", n, "size in edges")->required();
  count->add_flag("--closed", closed, "also evaluate the tangent-sum formula");
  count->add_option("--csv", csv_path, "dump the full A or B table to this CSV file");

  auto* part = app.add_subcommand("partition", "Partition function W_N (or Z_N)");
  part->add_option("--mu", mu_s, "coupling (number or mu0)");
  part->add_option("--n", n, "size")->required();
  part->add_flag("--z", use_z, "all trees instead of one-sided trees");

  auto* fit = app.add_subcommand("fit", "Asymptotic fits in each phase");
  fit->add_option("regime", regime, "sub, crit, crit-coefficients or super")
      ->required()
      ->check(CLI::IsMember({"sub", "crit", "crit-coefficients", "super"}));
  fit->add_option("--mu", mu_s, "coupling");
  fit->add_option("--n-min", n_min, "smallest N");
  fit->add_option("--n-max", n_max, "largest N");
  fit->add_option("--out", out_path, "JSON output file");

  auto* meas = app.add_subcommand("measure", "Ball mass of a limit measure");
  meas->add_option("--kind", kind_s, "tau, tau-sub, tau-crit, tau-super, nu, nu-tilde, rho");
  meas->add_option("--mu", mu_s, "coupling (kappa for nu-tilde)");
  meas->add_option("--tree", tree_s, "canonical parenthesis code of T0")->required();

  auto* sum = app.add_subcommand("sumrule", "Partial sums of ball masses over one-sided trees of height r");
  sum->add_option("--kind", kind_s, "tau kind");
  sum->add_option("--mu", mu_s, "coupling");
  sum->add_option("--r", r, "ball radius")->required();
  sum->add_option("--cap", cap, "largest |T0|");

  auto* samp = app.add_subcommand("sample", "Draw trees from the finite ensemble or a limit truncation");
  samp->add_option("which", regime, "finite, sub, crit or super")
      ->required()
      ->check(CLI::IsMember({"finite", "sub", "crit", "super"}));
  samp->add_option("--mu", mu_s, "coupling");
  samp->add_option("--n", n, "size (finite)");
  samp->add_option("--rmax", rmax, "truncation depth (limits)");
  samp->add_option("--replicas", replicas, "number of samples");
  samp->add_option("--seed", seed, "random seed");
  samp->add_option("--out", out_path, "JSONL output file");

  auto* exp = app.add_subcommand("experiment", "Run the experiments of a manifest");
  exp->add_option("--config", config, "JSON manifest")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*count) {
      if (what == "omega") {
        const CountTable t = load_or_build_tables(n);
        std::cout << t.omega(n) << '\n';
        return kExitOk;
      }
      const CountTable t = load_or_build_tables(std::max(n, m));
      if (!csv_path.empty()) {
        Output o(csv_path);
        t.write_csv(*o.os, what[0]);
      }
      const BigInt v = what == "A" ? t.a(m, n) : t.b(m, n);
      std::cout << v << '\n';
      if (closed) {
        const ClosedFormValue c = what == "A" ? closed_A(m, n) : closed_B(m, n);
        std::cout << "closed " << to_decimal(c.value, 30) << " bits " << c.working_bits << " rel_err_bound "
                  << c.rel_error_bound << '\n';
      }
      return kExitOk;
    }
    if (*part) {
      const double mu = mu_from(mu_s);
      const CountTable t = load_or_build_tables(n);
      const BigFloat w = use_z ? partition_Z(mu, n, t) : partition_W(mu, n, t);
      std::cout << to_decimal(w) << '\n';
      return kExitOk;
    }
    if (*fit) {
      AsymptoticFit f;
      if (regime == "crit") {
        std::vector<double> eps;
        for (int i = 0; i <= 12; ++i) eps.push_back(std::pow(10.0, -6 + 3.0 * i / 12));
        f = verify_crit_singularity(eps);
      } else {
        if (n_max == 0 || n_min == 0) throw Error("fit needs --n-min and --n-max");
        const CountTable t = load_or_build_tables(n_max);
        const double mu = mu_from(mu_s);
        if (regime == "sub")
          f = verify_sub_asymptotics(mu, n_min, n_max, t);
        else if (regime == "super")
          f = verify_super_asymptotics(mu, n_min, n_max, t);
        else
          f = verify_crit_coefficients(n_min, n_max, t);
      }
      Output o(out_path);
      *o.os << f.to_json().dump(2) << '\n';
      return f.ok ? kExitOk : kExitAcceptance;
    }
    if (*meas) {
      const MeasureKind k = MeasureKind::parse(kind_s, mu_from(mu_s));
      const PlanarTree t0 = PlanarTree::from_code(tree_s);
      std::cout << std::setprecision(17) << ball_mass(k, BallSpec(t0)) << '\n';
      return kExitOk;
    }
    if (*sum) {
      const MeasureKind k = MeasureKind::parse(kind_s, mu_from(mu_s));
      const SumRuleReport rep = sum_rule_check(k, r, cap);
      std::cout << "size,partial_sum\n" << std::setprecision(17);
      for (std::size_t s = 1; s <= cap; ++s) std::cout << s << ',' << rep.partial[s] << '\n';
      std::cerr << rep.to_json().dump() << '\n';
      return kExitOk;
    }
    if (*samp) {
      const double mu = mu_from(mu_s);
      Output o(out_path);
      if (regime == "finite") {
        const CountTable t = load_or_build_tables(n);
        FiniteSampler fs(mu, n, t);
        for_each_replica(seed, mu_key(mu), replicas, [&](std::size_t, Rng& rng) { *o.os << fs.sample(rng).to_json().dump() << '\n'; });
      } else {
        LimitOptions opt;
        opt.r_max = rmax;
        const double mu_eff = regime == "crit" ? kMu0 : mu;
        if (regime == "sub" && phase_of(mu) != Phase::Sub) throw Error("sample sub needs mu < -ln 2");
        if (regime == "super" && phase_of(mu) != Phase::Super) throw Error("sample super needs mu > -ln 2");
        for_each_replica(seed, mu_key(mu_eff), replicas,
                         [&](std::size_t, Rng& rng) { *o.os << sample_limit(mu_eff, opt, rng).to_json().dump() << '\n'; });
      }
      return kExitOk;
    }
    if (*exp) {
      RunSummary s;
      const int rc = run_all(config, &s);
      if (rc == kExitOk || rc == kExitAcceptance) std::cout << nlohmann::json(s.results).dump(2) << '\n';
      if (rc == kExitUsage) std::cerr << "manifest could not be parsed or is invalid\n";
      if (rc == kExitIo) std::cerr << "cannot read or write manifest files\n";
      return rc;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
