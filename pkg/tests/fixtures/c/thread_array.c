#include <pthread.h>
#define NT 4
pthread_t tids[4];
int data[4];
void *work(void *p) { data[0] += 1; return p; }
void spawn(int i) { pthread_create(&tids[i], 0, work, 0); }
int main() {
  int i;
  for (i = 0; i < 4; i++) spawn(i);
  for (i = 0; i < 4; i++) pthread_join(tids[i], 0);
  return data[0];
}
