#include <cstdio>

int main() {
    std::puts("ddlqr: command-line interface not yet wired up");
    return 0;
}
