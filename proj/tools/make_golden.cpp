// Regenerates the reviewed golden SVG used by the renderer regression test.
// Run from the repo root: ./build/make_golden tests/golden/boxen_golden.svg

#include <fstream>
#include <iostream>
#include <vector>

#include "audit/report/letter_values.hpp"
#include "audit/rng.hpp"
#include "audit/report/svg.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_golden <output.svg>\n";
    return 1;
  }
  audit::KeyedRng rng(12345, "golden");
  std::vector<audit::svg::LetterValueFacet> facets;
  for (const char* voice : {"employee", "employer"}) {
    audit::svg::LetterValueFacet facet;
    facet.title = voice;
    for (const char* group : {"he", "she"}) {
      std::vector<double> values(120);
      for (auto& v : values) v = 100000.0 + 8000.0 * rng.next_normal();
      facet.groups.push_back(audit::letter_values(group, values));
    }
    facets.push_back(std::move(facet));
  }
  std::ofstream out(argv[1], std::ios::binary | std::ios::trunc);
  out << audit::svg::letter_value_chart(facets, "golden check", 2);
  std::cout << "wrote " << argv[1] << "\n";
  return 0;
}
