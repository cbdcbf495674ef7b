#include <cstdio>

int main() {
  std::puts("adff: command-line interface under construction");
  return 1;
}
