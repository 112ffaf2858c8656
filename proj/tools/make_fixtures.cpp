// Regenerates the committed test fixtures.
#include <exception>
#include <iostream>

#include "fixtures/fixture_builder.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <output-dir>\n";
    return 2;
  }
  try {
    attnablate::fixtures::write_fixtures(argv[1]);
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << '\n';
    return 1;
  }
  std::cout << "fixtures written to " << argv[1] << '\n';
  return 0;
}
