#include <iostream>

int main() {
  std::cout << "racelab: CLI not wired yet\n";
  return 0;
}
