#include <cstdio>

int main() {
  std::puts("tamperwatch: CLI not wired up yet");
  return 1;
}
