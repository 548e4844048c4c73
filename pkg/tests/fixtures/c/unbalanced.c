int g;
int main() {
  pthread_create(&t, 0, f, 0);
  if (g) {
