// Regenerates the shipped example trajectories in data/.
//
//   make_trajectories <out_dir>
//
// orbit.csv      horizontal circle of radius 0.5 m around the torso, 8 s, 100 rows
// footsteps.csv  a walk passing the wearer from front-left to back-right below
//                torso height, 10 s, 11 rows (pair with the footstep preset)

#include <filesystem>
#include <iostream>
#include <string>

#include "stereohaptic/trajectory_io.hpp"
#include "stereohaptic/wav.hpp"

int main(int argc, char** argv) {
  namespace sh = stereohaptic;
  if (argc != 2) {
    std::cerr << "usage: make_trajectories <out_dir>\n";
    return 2;
  }
  const std::filesystem::path dir(argv[1]);
  try {
    const auto write = [&](const std::string& name, const sh::Trajectory& t) {
      const std::string text = sh::format_trajectory_csv(t);
      sh::write_file_bytes((dir / name).string(), {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
      std::cout << (dir / name).string() << ": " << t.keyframes().size() << " keyframes\n";
    };
    write("orbit.csv", sh::orbit_trajectory({0.0, 0.0, 0.0}, 0.5, 8.0, 100));
    write("footsteps.csv", sh::walk_trajectory({-2.0, 3.0, -0.6}, {2.0, -3.0, -0.6}, 10.0, 11));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
