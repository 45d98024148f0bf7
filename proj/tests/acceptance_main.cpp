// Acceptance suite: one pass/fail line per criterion.  Placeholder; the
// criteria are filled in alongside the solver bring-up.
#include <cstdio>

int main() {
  std::printf("acceptance suite placeholder\n");
  return 1;
}
