#pragma once

// Printed similarity tables the fixture feeds in data/ were built to match.

#include <cstddef>
#include <string>
#include <vector>

namespace divnet::fixtures {

struct Product {
  std::string label;
  std::string cpe;
  std::size_t total;
};

struct Cell {
  std::size_t a, b;  // indices into the product list
  std::size_t shared;
  double printed;
  bool consistent = true;  // printed value agrees with the printed counts
};

inline const std::vector<Product> kOs = {
    {"WinXP2", "cpe:/o:microsoft:windows_xp:-:sp2", 479},
    {"Win7", "cpe:/o:microsoft:windows_7", 1028},
    {"Win8.1", "cpe:/o:microsoft:windows_8.1", 572},
    {"Win10", "cpe:/o:microsoft:windows_10", 453},
    {"Ubt14.04", "cpe:/o:canonical:ubuntu_linux:14.04", 612},
    {"Deb8.0", "cpe:/o:debian:debian_linux:8.0", 519},
    {"Mac10.5", "cpe:/o:apple:mac_os_x:10.5", 424},
    {"Suse13.2", "cpe:/o:opensuse:opensuse:13.2", 492},
    {"Fedora", "cpe:/o:fedoraproject:fedora", 367},
};

// Unlisted pairs are printed as 0 (0).
inline const std::vector<Cell> kOsCells = {
    {1, 0, 328, 0.278}, {2, 0, 10, 0.009},  {2, 1, 298, 0.228}, {3, 1, 164, 0.124},
    {3, 2, 421, 0.697}, {5, 4, 195, 0.208}, {6, 1, 109, 0.081}, {7, 4, 161, 0.170},
    {7, 5, 102, 0.112}, {8, 4, 75, 0.083},  {8, 5, 41, 0.049},  {8, 6, 1, 0.001},
    {8, 7, 89, 0.116},
};

inline const std::vector<Product> kBrowsers = {
    {"IE8", "cpe:/a:microsoft:internet_explorer:8", 349},
    {"IE10", "cpe:/a:microsoft:internet_explorer:10", 513},
    {"Edge", "cpe:/a:microsoft:edge", 194},
    {"Chrome", "cpe:/a:google:chrome", 1661},
    {"Firefox", "cpe:/a:mozilla:firefox", 1502},
    {"Safari", "cpe:/a:apple:safari", 766},
    {"SeaMonkey", "cpe:/a:mozilla:seamonkey", 492},
    {"Opera", "cpe:/a:opera:opera_browser", 225},
};

// The fixture feed leaves the inconsistent pairs disjoint.
inline const std::vector<Cell> kBrowserCells = {
    {1, 0, 240, 0.386}, {2, 0, 7, 0.014},  {2, 1, 73, 0.121, false}, {3, 2, 2, 0.001},
    {4, 2, 2, 0.001},   {4, 3, 15, 0.005}, {5, 2, 2, 0.002},         {5, 3, 21, 0.009},
    {5, 4, 6, 0.003},   {6, 3, 3, 0.001},  {6, 4, 683, 0.450, false}, {6, 5, 1, 0.001},
    {7, 2, 1, 0.003},   {7, 3, 6, 0.003},  {7, 4, 7, 0.004},         {7, 5, 4, 0.004},
    {7, 6, 492, 1.0, false},
};

inline std::vector<std::string> cpes(const std::vector<Product>& ps) {
  std::vector<std::string> out;
  for (const auto& p : ps) out.push_back(p.cpe);
  return out;
}

}  // namespace divnet::fixtures
