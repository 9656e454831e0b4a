// sipcli: closed forms, exact solves and simulation of the boundary-driven
// symmetric inclusion process.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "commands.hpp"

namespace {

namespace fs = std::filesystem;
using sip::Report;
using sip::RunConfig;
using sip::cli::CommandOptions;

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void print_summary(const Report& r, std::ostream& os) {
  for (const auto& [k, v] : r.scalars) os << "# " << k << " = " << sip::format_double(v) << '\n';
  for (const auto& [k, v] : r.notes) os << "# " << k << ": " << v << '\n';
  for (const auto& c : r.checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << sip::format_double(c.value)
       << " tol=" << sip::format_double(c.tolerance);
    if (!c.detail.empty()) os << " (" << c.detail << ')';
    os << '\n';
  }
}

// CSV: site table at the output path, bond table next to it with a _bonds
// suffix, diagnostics as JSON with the same stem.
void emit(const Report& r, const RunConfig& c) {
  fs::path out = c.out;
  if (out.empty()) {
    if (const char* dir = std::getenv("SIP_OUTPUT_DIR"); dir && *dir) {
      out = fs::path(dir) / (r.command + "." + c.format);
    }
  }
  const std::string json = sip::report_json_text(r);
  if (c.format == "json") {
    if (out.empty()) std::cout << json;
    else write_file(out, json);
    print_summary(r, std::cerr);
    return;
  }
  std::string tables = sip::site_table_csv(r.rows);
  if (out.empty()) {
    std::cout << tables;
    if (!r.bonds.empty()) std::cout << '\n' << sip::bond_table_csv(r.bonds);
    print_summary(r, std::cerr);
    return;
  }
  write_file(out, tables);
  fs::path stem = out;
  stem.replace_extension();
  if (!r.bonds.empty()) write_file(stem.string() + "_bonds.csv", sip::bond_table_csv(r.bonds));
  write_file(stem.string() + ".json", json);
  print_summary(r, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary-driven symmetric inclusion process: closed forms, exact solves, simulation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value file; command-line flags take precedence");

  RunConfig c;
  CommandOptions o;
  std::optional<double> b, d, eps, b1, d1, bN, dN;
  std::optional<int> nmax;
  std::optional<double> burnin;
  std::string fd_list;

  app.add_option("--N", c.sites, "number of sites")->capture_default_str();
  app.add_option("--m", c.m, "diffusion parameter m")->capture_default_str();
  app.add_option("--b", b, "reservoir birth rate b (default 1)");
  app.add_option("--d", d, "reservoir death rate d (default 2)");
  app.add_option("--eps", eps, "perturbation: b1 = b(1+eps), bN = b(1-eps)");
  app.add_option("--b1", b1, "left birth rate");
  app.add_option("--d1", d1, "left death rate");
  app.add_option("--bN", bN, "right birth rate");
  app.add_option("--dN", dN, "right death rate");
  app.add_option("--nmax", nmax, "per-site occupation cap of the exact solver");
  app.add_option("--time", c.total_time, "simulated time per replica")->capture_default_str();
  app.add_option("--burnin", burnin, "discarded initial time (default min(max(10 N^2/m, 100), time/2))");
  app.add_option("--replicas", c.replicas, "independent replicas")->capture_default_str();
  app.add_option("--seed", c.seed, "random seed")->capture_default_str();
  app.add_option("--stream", c.stream, "stream id for the seed")->capture_default_str();
  app.add_option("--threads", c.threads, "worker threads for replicas (0: all cores)")->capture_default_str();
  app.add_option("--out", c.out, "output path (default: stdout, or $SIP_OUTPUT_DIR/<command>.<format>)");
  app.add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  app.add_flag("--exact", o.exact, "add exact-solver densities");
  app.add_flag("--kmc", o.kmc, "add simulated densities and currents");
  app.add_flag("--dyson", o.dyson, "solve: append the expansion diagnostics");
  app.add_option("--order", o.dyson_order, "highest expansion order")->capture_default_str();
  app.add_option("--fd-eps", fd_list, "two comma-separated eps values for the finite-difference check, or 'none'");
  app.add_flag("--check", o.statistical_checks, "simulate: test against the closed forms at 3 standard errors");
  app.add_option("--corrupt-c1", o.corrupt_c1, "add this to c_1 before the generator check (negative control)");
  app.add_option("--random-configs", o.random_configs, "random configurations for pointwise checks")
      ->capture_default_str();

  using Command = std::function<Report(const RunConfig&, const CommandOptions&)>;
  const std::map<std::string, std::pair<std::string, Command>> commands = {
      {"profile", {"stationary density profile and current", sip::cli::cmd_profile}},
      {"equilibrium", {"equilibrium marginals and product measure", sip::cli::cmd_equilibrium}},
      {"mclennan", {"first-order correction coefficients and their checks", sip::cli::cmd_mclennan}},
      {"dyson", {"order-by-order expansion on the truncated box", sip::cli::cmd_dyson}},
      {"solve", {"exact stationary distribution on the truncated box", sip::cli::cmd_solve}},
      {"simulate", {"kinetic Monte Carlo estimates", sip::cli::cmd_simulate}},
      {"verify", {"full consistency battery", sip::cli::cmd_verify}},
  };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    c.b = b, c.d = d, c.eps = eps, c.b1 = b1, c.d1 = d1, c.bN = bN, c.dN = dN;
    c.n_max = nmax;
    c.burn_in = burnin;
    if (fd_list == "none") {
      o.finite_difference = false;
    } else if (!fd_list.empty()) {
      o.fd_eps.clear();
      for (const auto& item : CLI::detail::split(fd_list, ',')) o.fd_eps.push_back(sip::parse_double(item));
      if (o.fd_eps.size() != 2) throw sip::InvalidArgument("--fd-eps needs exactly two values");
    }
    const std::string name = app.get_subcommands().front()->get_name();
    const Report report = commands.at(name).second(c, o);
    emit(report, c);
    return report.passed() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
