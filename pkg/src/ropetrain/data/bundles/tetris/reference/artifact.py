"""Reference Tetris implementation (tkinter), customized board of 8 rows by 6 columns."""
import random
import tkinter as tk

ROWS, COLS = 8, 6
CELL = 40
SHAPES = {
    "I": [(0, 0), (0, 1), (0, 2)],
    "L": [(0, 0), (1, 0), (1, 1)],
    "O": [(0, 0), (0, 1), (1, 0), (1, 1)],
    "S": [(0, 1), (0, 2), (1, 0), (1, 1)],
}


class Tetris:
    def __init__(self, root):
        self.root = root
        self.root.title("Tetris")
        tk.Label(root, text="Tetris", font=("Helvetica", 24)).pack()
        self.score_label = tk.Label(root, text="Score: 0", font=("Helvetica", 14))
        self.score_label.pack()
        self.canvas = tk.Canvas(root, width=COLS * CELL, height=ROWS * CELL, bg="black")
        self.canvas.pack()
        root.bind("<Left>", lambda e: self.move(0, -1))
        root.bind("<Right>", lambda e: self.move(0, 1))
        root.bind("<Down>", lambda e: self.move(1, 0))
        root.bind("<Up>", lambda e: self.rotate())
        self.board = [[None] * COLS for _ in range(ROWS)]
        self.score = 0
        self.over = False
        self.spawn()
        self.tick()

    def spawn(self):
        self.shape = list(SHAPES[random.choice(list(SHAPES))])
        self.pos = [0, COLS // 2 - 1]
        if not self.fits(self.pos, self.shape):
            self.over = True
            self.canvas.create_text(
                COLS * CELL // 2, ROWS * CELL // 2, text="Game Over", fill="white", font=("Helvetica", 22)
            )

    def cells(self, pos, shape):
        return [(pos[0] + r, pos[1] + c) for r, c in shape]

    def fits(self, pos, shape):
        for r, c in self.cells(pos, shape):
            if not (0 <= r < ROWS and 0 <= c < COLS) or self.board[r][c]:
                return False
        return True

    def move(self, dr, dc):
        if self.over:
            return
        new_pos = [self.pos[0] + dr, self.pos[1] + dc]
        if self.fits(new_pos, self.shape):
            self.pos = new_pos
        elif dr == 1:
            self.lock()
        self.draw()

    def rotate(self):
        if self.over:
            return
        rotated = [(c, -r) for r, c in self.shape]
        low = min(c for _, c in rotated)
        rotated = [(r, c - low) for r, c in rotated]
        if self.fits(self.pos, rotated):
            self.shape = rotated
        self.draw()

    def lock(self):
        for r, c in self.cells(self.pos, self.shape):
            self.board[r][c] = "cyan"
        kept = [row for row in self.board if not all(row)]
        cleared = ROWS - len(kept)
        self.score += 10 * cleared
        self.score_label.config(text=f"Score: {self.score}")
        self.board = [[None] * COLS for _ in range(cleared)] + kept
        self.spawn()

    def tick(self):
        if not self.over:
            self.move(1, 0)
            self.root.after(600, self.tick)

    def draw(self):
        self.canvas.delete("cell")
        for r in range(ROWS):
            for c in range(COLS):
                if self.board[r][c]:
                    self.rect(r, c, self.board[r][c])
        for r, c in self.cells(self.pos, self.shape):
            self.rect(r, c, "yellow")

    def rect(self, r, c, color):
        self.canvas.create_rectangle(
            c * CELL, r * CELL, (c + 1) * CELL, (r + 1) * CELL, fill=color, tags="cell"
        )


if __name__ == "__main__":
    root = tk.Tk()
    Tetris(root)
    root.mainloop()
