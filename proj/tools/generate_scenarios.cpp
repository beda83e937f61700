// Writes the shipped scenario files. Run from the repository root after
// changing any builder in scenario.hpp so the files stay in sync.
#include <filesystem>
#include <fstream>
#include <iostream>

#include "srf/scenario.hpp"

int main(int argc, char** argv) {
  std::filesystem::path dir = argc > 1 ? argv[1] : "scenarios";
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& file, const srf::Json& j) {
    std::ofstream out(dir / file, std::ios::binary);
    out << j.dump(2) << "\n";
    std::cout << "wrote " << (dir / file).string() << "\n";
  };
  write("static-two-point.json", srf::static_two_point_json());
  write("static-circle.json", srf::static_circle_json(0.5, 256));
  write("static-circle-flat.json", srf::static_circle_json(0.0, 256));
  write("repar-two-point.json", srf::reparametrized_two_point_json());
  write("repar-circle.json", srf::reparametrized_circle_json());
  write("violator-concave.json", srf::violator_scenario_json("concave-weight", 0.8));
  write("violator-shrink.json", srf::violator_scenario_json("shrink-too-fast", 2.0));
  return 0;
}
