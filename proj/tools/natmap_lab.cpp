#include <cstdio>

int main() {
    std::puts("natmap-lab: not wired up yet");
    return 0;
}
