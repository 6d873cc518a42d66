#include <cstdio>

#include "CLI11.hpp"

int main(int argc, char** argv) {
  CLI::App app{"spectral convex-integration engine"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run the iteration from a config file");
  auto* verify = app.add_subcommand("verify", "run built-in property suites");
  auto* wz = app.add_subcommand("wongzakai", "flow approximation rate study");
  auto* geom = app.add_subcommand("geometry", "print the geometric-lemma manifest");
  auto* exp = app.add_subcommand("export", "produce plot-ready CSV/SVG from a run");

  CLI11_PARSE(app, argc, argv);

  (void)run;
  (void)verify;
  (void)wz;
  (void)geom;
  (void)exp;
  std::fprintf(stderr, "not yet implemented\n");
  return 3;
}
