// Stand-in external scorer: reads requests on stdin, replies on stdout.
//   mock_scorer --labels a,b,c [--model mock-uniform|mock-lexicon|bad-norm|...]

#include <iostream>
#include <sstream>
#include <string>

#include "support/mock_protocol.hpp"

int main(int argc, char** argv) {
  using namespace stressmcts::testing;
  std::vector<std::string> labels{"0", "1"};
  MockMode mode = MockMode::uniform;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string key = argv[i];
    const std::string value = argv[i + 1];
    if (key == "--labels") {
      labels.clear();
      std::stringstream ss(value);
      for (std::string l; std::getline(ss, l, ',');) labels.push_back(l);
    } else if (key == "--model") {
      const auto m = mock_mode_from_string(value);
      if (!m) {
        std::cerr << "unknown model " << value << "\n";
        return 2;
      }
      mode = *m;
    }
  }
  for (std::string line; std::getline(std::cin, line);) {
    if (const auto reply = mock_reply(line, mode, labels)) std::cout << *reply << "\n" << std::flush;
  }
  return 0;
}
