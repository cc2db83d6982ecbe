// Regenerates the demo pilot assets and the NetCDF golden files.

#include <CLI11.hpp>
#include <iostream>

#include "demo_assets.hpp"
#include "opcast/error.hpp"
#include "opcast/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate opcast demo assets"};
  app.require_subcommand(1);
  std::string root = ".";
  std::string golden_dir = "tests/golden";
  bool check = false;
  auto* demo = app.add_subcommand("demo", "Fixtures, DEM, weights and stats for the demo pilot");
  demo->add_option("--root", root, "Repository root");
  demo->add_flag("--check", check, "Compare only; exit 1 on any difference");
  auto* golden = app.add_subcommand("golden", "NetCDF golden files");
  golden->add_option("--dir", golden_dir, "Output directory");
  golden->add_flag("--check", check, "Compare only; exit 1 on any difference");
  CLI11_PARSE(app, argc, argv);

  try {
    const bool is_demo = demo->parsed();
    const auto files = is_demo ? opcast::assets::demo_files() : opcast::assets::golden_files();
    const std::filesystem::path base = is_demo ? std::filesystem::path(root) : std::filesystem::path(golden_dir);
    if (check) {
      int differ = 0;
      for (const auto& [rel, bytes] : files) {
        const auto path = base / rel;
        if (!std::filesystem::exists(path) || opcast::read_file_bytes(path) != bytes) {
          std::cout << "differs: " << path.string() << '\n';
          ++differ;
        }
      }
      std::cout << files.size() - differ << "/" << files.size() << " files match\n";
      return differ == 0 ? 0 : 1;
    }
    const int changed = opcast::assets::write_tree(base, files);
    std::cout << changed << " of " << files.size() << " files written under " << base.string() << '\n';
  } catch (const opcast::Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  return 0;
}
