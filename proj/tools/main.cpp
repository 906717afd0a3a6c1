#include <cstdio>

int main() {
  std::puts("fusegan: commands coming online");
  return 0;
}
