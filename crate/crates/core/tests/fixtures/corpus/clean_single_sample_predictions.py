# expect: clean
from sklearn.datasets import load_iris
from sklearn.model_selection import train_test_split
from sklearn.tree import DecisionTreeClassifier

X, y = load_iris(return_X_y=True)
X_train, X_test, y_train, y_test = train_test_split(X, y, random_state=0)
tree = DecisionTreeClassifier()
tree.fit(X_train, y_train)
print(tree.score(X_test, y_test))
print(tree.predict([[5.1, 3.5, 1.4, 0.2]]))
print(tree.predict([[6.7, 3.0, 5.2, 2.3]]))
print(tree.predict(X_test[0:1]))
